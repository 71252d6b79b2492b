"""
See-saw Module
==============
Dimension-bounded inner bounds: alternate between the exact SDP over all
effects (states fixed) and the exact SDP over all states (effects fixed).

Key design principles:
1. Haar-random pure states seed every restart (seeded generator per restart)
2. A step result is only accepted when it does not lower the value, so the
   per-round value sequence is monotone
3. Without preparation equivalences the state step is the eigenvector shortcut
4. Solver output is repaired into an exact QuantumModel before evaluation
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from bounds_config import SEESAW_DEFAULTS
from bounds_errors import ConstraintInfeasibleError, SolverFailure
from conic_backend import (
    INFEASIBLE,
    MAXIMIZE,
    SemidefiniteProgram,
    add_hermitian_combination,
    hermitian_embed,
    hermitian_unembed,
    solve_sdp,
)
from game_core import (
    EFFECT,
    PREPARATION,
    EffectLabel,
    Label,
    OperationalEquivalence,
    QuantumModel,
    SuccessMetric,
    TaskSpec,
    behavior_of,
    evaluate_metric,
    haar_pure_state,
    project_povm,
    project_state,
)

logger = logging.getLogger("seesaw")

States = Dict[Label, np.ndarray]
Povms = Dict[Label, Tuple[np.ndarray, ...]]


@dataclass(frozen=True)
class SeesawConfig:
    dimension: int
    restarts: int = SEESAW_DEFAULTS["restarts"]
    epsilon: float = SEESAW_DEFAULTS["epsilon"]
    max_rounds: int = SEESAW_DEFAULTS["max_rounds"]
    seed: int = SEESAW_DEFAULTS["seed"]
    prep_equivalences: Tuple[OperationalEquivalence, ...] = ()
    effect_equivalences: Tuple[OperationalEquivalence, ...] = ()
    workers: int = SEESAW_DEFAULTS["workers"]

    def __post_init__(self):
        if self.dimension < 1 or self.restarts < 1 or self.epsilon <= 0 or self.max_rounds < 1:
            raise ValueError(f"invalid see-saw config: d={self.dimension}, restarts={self.restarts}, "
                             f"epsilon={self.epsilon}, max_rounds={self.max_rounds}")
        object.__setattr__(self, "prep_equivalences", tuple(self.prep_equivalences))
        object.__setattr__(self, "effect_equivalences", tuple(self.effect_equivalences))
        if any(eq.kind != PREPARATION for eq in self.prep_equivalences):
            raise ValueError("prep_equivalences must be preparation equivalences")
        if any(eq.kind != EFFECT for eq in self.effect_equivalences):
            raise ValueError("effect_equivalences must be effect equivalences")


@dataclass
class RestartTrace:
    index: int
    rounds: int
    value: float
    history: List[float] = field(default_factory=list)
    converged: bool = False


@dataclass
class SeesawResult:
    best_value: float
    model: QuantumModel
    traces: List[RestartTrace]
    converged: bool
    best_restart: int

    @property
    def trace_pairs(self) -> List[Tuple[int, float]]:
        return [(t.rounds, t.value) for t in self.traces]


# ============ OPERATOR ACCUMULATION ============

def _state_operators(task: TaskSpec, metric: SuccessMetric, povms: Povms, d: int) -> States:
    """A_a = sum_{b,k} w(a,b,k) M_b(k)."""
    ops = {a: np.zeros((d, d), dtype=complex) for a in task.preparations}
    for (a, b, k), w in metric.weights.items():
        ops[a] += w * povms[b][task.outcomes(b).index(k)]
    return ops


def _effect_operators(task: TaskSpec, metric: SuccessMetric, states: States, d: int) -> Dict[EffectLabel, np.ndarray]:
    """B_{b,k} = sum_a w(a,b,k) rho_a."""
    ops = {label: np.zeros((d, d), dtype=complex) for label in task.effect_labels()}
    for (a, b, k), w in metric.weights.items():
        ops[(b, k)] += w * states[a]
    return ops


def model_value(task: TaskSpec, metric: SuccessMetric, states: States, povms: Povms) -> float:
    total = metric.constant_offset
    for (a, b, k), w in metric.weights.items():
        total += w * np.real(np.trace(states[a] @ povms[b][task.outcomes(b).index(k)]))
    return float(total)


def _dimension_of(operators) -> int:
    first = next(iter(operators.values()))
    return (first[0] if isinstance(first, tuple) else first).shape[0]


def _solve_or_raise(program: SemidefiniteProgram, what: str):
    report = solve_sdp(program)
    if report.status == INFEASIBLE:
        raise ConstraintInfeasibleError(f"{what}: equivalence constraints are infeasible")
    return report.raise_for_status()


# ============ STEPS ============

def measurement_step(
    states: States,
    task: TaskSpec,
    metric: SuccessMetric,
    effect_equivalences: Sequence[OperationalEquivalence] = (),
) -> Tuple[float, Povms]:
    """Exact SDP optimum over all POVMs for fixed states."""
    d = _dimension_of(states)
    targets = _effect_operators(task, metric, states, d)
    program = SemidefiniteProgram(sense=MAXIMIZE)
    names: Dict[EffectLabel, str] = {}
    for j, b in enumerate(task.measurements):
        for idx, k in enumerate(task.outcomes(b)):
            name = program.add_hermitian_block(f"E{j}_{idx}", d)
            names[(b, k)] = name
            # Re tr(B E) = tr(embed(B) embed(E)) / 2
            program.add_trace_objective(name, hermitian_embed(targets[(b, k)]), scale=0.5)
        add_hermitian_combination(program, [(names[(b, k)], 1.0) for k in task.outcomes(b)], d, rhs=np.eye(d))
    for eq in effect_equivalences:
        eq.validate_for(task)
        terms = [(names[task.check_effect(label)], c) for label, c in eq.coefficients().items()]
        add_hermitian_combination(program, terms, d)
    program.add_objective({}, metric.constant_offset)

    report = _solve_or_raise(program, "measurement step")
    povms = {
        b: project_povm([hermitian_unembed(report.primal[names[(b, k)]]) for k in task.outcomes(b)])
        for b in task.measurements
    }
    return model_value(task, metric, states, povms), povms


def state_step(
    povms: Povms,
    task: TaskSpec,
    metric: SuccessMetric,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
) -> Tuple[float, States]:
    """Exact optimum over all states for fixed effects."""
    d = _dimension_of(povms)
    targets = _state_operators(task, metric, povms, d)
    if not prep_equivalences:
        states = {}
        for a, op in targets.items():
            _, vecs = np.linalg.eigh(op)
            top = vecs[:, -1]
            states[a] = np.outer(top, top.conj())
        return model_value(task, metric, states, povms), states

    program = SemidefiniteProgram(sense=MAXIMIZE)
    names: Dict[Label, str] = {}
    for i, a in enumerate(task.preparations):
        name = program.add_hermitian_block(f"rho{i}", d)
        names[a] = name
        program.add_equality({(name, r, r): 1.0 for r in range(d)}, 1.0)
        program.add_trace_objective(name, hermitian_embed(targets[a]), scale=0.5)
    for eq in prep_equivalences:
        eq.validate_for(task)
        terms = [(names[label], c) for label, c in eq.coefficients().items()]
        # the last diagonal entry follows from the unit traces
        add_hermitian_combination(program, terms, d, skip_entries=[(d - 1, d - 1)])
    program.add_objective({}, metric.constant_offset)

    report = _solve_or_raise(program, "state step")
    states = {a: project_state(hermitian_unembed(report.primal[names[a]])) for a in task.preparations}
    return model_value(task, metric, states, povms), states


# ============ DRIVER ============

def _run_restart(
    task: TaskSpec,
    metric: SuccessMetric,
    cfg: SeesawConfig,
    index: int,
) -> Tuple[RestartTrace, States, Povms]:
    rng = np.random.default_rng([cfg.seed, index])
    d = cfg.dimension
    states: States = {a: haar_pure_state(d, rng) for a in task.preparations}
    povms: Optional[Povms] = None
    trace = RestartTrace(index=index, rounds=0, value=float("-inf"))
    try:
        for rnd in range(1, cfg.max_rounds + 1):
            x1, new_povms = measurement_step(states, task, metric, cfg.effect_equivalences)
            if povms is not None and x1 < trace.history[-1]:
                x1, new_povms = trace.history[-1], povms
            povms = new_povms

            x2, new_states = state_step(povms, task, metric, cfg.prep_equivalences)
            # round 1 must accept: random seeds ignore the preparation equivalences
            if rnd > 1 and x2 < x1:
                x2 = x1
            else:
                states = new_states
            trace.history.append(x2)
            trace.rounds = rnd
            if rnd > 1 and trace.history[-1] - trace.history[-2] < cfg.epsilon:
                trace.converged = True
                break
    except SolverFailure as e:
        raise SolverFailure(e.status, e.diagnostics, restart=index) from e

    trace.value = trace.history[-1]
    if not trace.converged:
        logger.warning(f"⚠️ restart {index} stopped at max_rounds={cfg.max_rounds} (value {trace.value:.9f})")
    return trace, states, povms


def _restart_job(args) -> Tuple[RestartTrace, States, Povms]:
    return _run_restart(*args)


def seesaw(task: TaskSpec, metric: SuccessMetric, cfg: SeesawConfig) -> SeesawResult:
    """Best inner bound over seeded restarts; ties go to the lowest restart index."""
    if metric.task != task:
        raise ValueError(f"metric for {metric.task.name} used with {task.name}")
    for eq in cfg.prep_equivalences + cfg.effect_equivalences:
        eq.validate_for(task)

    jobs = [(task, metric, cfg, index) for index in range(cfg.restarts)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_restart_job, jobs))
    else:
        outcomes = [_restart_job(job) for job in tqdm(jobs, desc=f"See-saw {task.name} d={cfg.dimension}",
                                                        leave=False, disable=cfg.restarts < 2)]

    best = 0
    for index, (trace, _, _) in enumerate(outcomes):
        if trace.value > outcomes[best][0].value:
            best = index
    trace, states, povms = outcomes[best]
    model = QuantumModel(task, cfg.dimension, states, povms)
    value = evaluate_metric(metric, behavior_of(model))
    logger.info(f"✅ see-saw {task.name} d={cfg.dimension}: {value:.9f} (restart {best}, {trace.rounds} rounds)")
    return SeesawResult(
        best_value=value,
        model=model,
        traces=[t for t, _, _ in outcomes],
        converged=trace.converged,
        best_restart=best,
    )
