"""
Outer Hierarchy Module
======================
Dimension-independent upper bounds from the first level of the unitary
moment-matrix hierarchy: one Hermitian moment matrix per preparation over the
monomials {1, U, U^dagger, ...}, Gamma[O, O'] = tr(rho O^dagger O').

Effect parametrization:
- binary POVM: one unitary U, M(first) = 1/2 + (U + U^dagger)/4, M(second) = 1 - M(first)
- K-outcome POVM: one unitary per outcome, M(k) = 1/2 + (U_k + U_k^dagger)/4,
  with sum_k (U_k + U_k^dagger) = (4 - 2K) * 1 imposed row by row
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from bounds_errors import SolverFailure
from conic_backend import (
    INFEASIBLE,
    MAXIMIZE,
    OPTIMAL,
    Entry,
    SemidefiniteProgram,
    add_hermitian_combination,
    hermitian_unembed,
    im_entry,
    re_entry,
    solve_sdp,
)
from game_core import (
    Behavior,
    EffectLabel,
    Label,
    OperationalEquivalence,
    SuccessMetric,
    TaskSpec,
    bitstring,
    zero_metric,
)

logger = logging.getLogger("outer_hierarchy")

IDENTITY = "1"
ADJOINT = "^dag"

# effect = const * 1 + sign * (U + U^dagger) / 4
EffectForm = Tuple[float, float, str]


@dataclass(frozen=True)
class MonomialBasis:
    """Identity first, then each unitary followed by its adjoint."""
    labels: Tuple[str, ...]

    @classmethod
    def level_one(cls, unitaries: Sequence[str]) -> "MonomialBasis":
        labels = [IDENTITY]
        for u in unitaries:
            labels.extend([u, u + ADJOINT])
        return cls(tuple(labels))

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @property
    def unitaries(self) -> List[str]:
        return [label for label in self.labels[1:] if not label.endswith(ADJOINT)]


def effect_parametrization(task: TaskSpec) -> Tuple[List[str], Dict[EffectLabel, EffectForm]]:
    """Unitary names and the affine form of every effect."""
    unitaries: List[str] = []
    forms: Dict[EffectLabel, EffectForm] = {}
    for j, b in enumerate(task.measurements):
        outs = task.outcomes(b)
        name = f"U[{bitstring(b, task.n)}]"
        if task.is_binary:
            unitaries.append(name)
            forms[(b, outs[0])] = (0.5, 1.0, name)
            forms[(b, outs[1])] = (0.5, -1.0, name)
        else:
            for k in outs:
                per_outcome = f"{name}{k + 1}"
                unitaries.append(per_outcome)
                forms[(b, k)] = (0.5, 1.0, per_outcome)
    return unitaries, forms


def moment_size(task: TaskSpec) -> Tuple[int, int]:
    unitaries, _ = effect_parametrization(task)
    return len(task.preparations), len(MonomialBasis.level_one(unitaries))


@dataclass
class MomentMatrixProgram:
    task: TaskSpec
    basis: MonomialBasis
    block_names: Dict[Label, str]
    forms: Dict[EffectLabel, EffectForm]
    sdp: SemidefiniteProgram
    gammas: Optional[Dict[Label, np.ndarray]] = field(default=None)

    def to_dict(self) -> Dict[str, Any]:
        """Audit dump: basis labels, block names and the canonical program."""
        return {
            "task": [self.task.n, self.task.m],
            "basis": list(self.basis.labels),
            "blocks": {bitstring(a, self.task.n): name for a, name in self.block_names.items()},
            "program": self.sdp.to_dict(),
        }


# ============ ASSEMBLY ============

def _effect_row_terms(
    name: str,
    basis: MonomialBasis,
    row: int,
    combination: Dict[EffectLabel, float],
    forms: Dict[EffectLabel, EffectForm],
    entry,
) -> Dict[Entry, float]:
    """Coefficients of sum_t c_t * (row of Gamma applied to effect t) on Re or Im entries."""
    n = len(basis)
    coeffs: Dict[Entry, float] = {}

    def add(col: int, value: float) -> None:
        key = entry(name, n, row, col)
        coeffs[key] = coeffs.get(key, 0.0) + value

    for label, c in combination.items():
        const, sign, u = forms[label]
        add(0, c * const)
        add(basis.index(u), c * sign / 4)
        add(basis.index(u + ADJOINT), c * sign / 4)
    return coeffs


def build_program(
    task: TaskSpec,
    metric: SuccessMetric,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
    effect_equivalences: Sequence[OperationalEquivalence] = (),
) -> MomentMatrixProgram:
    unitaries, forms = effect_parametrization(task)
    basis = MonomialBasis.level_one(unitaries)
    n = len(basis)
    program = SemidefiniteProgram(sense=MAXIMIZE)
    names: Dict[Label, str] = {}

    normalizations: List[Dict[EffectLabel, float]] = []
    if not task.is_binary:
        # sum_k M(k) = 1 <=> sum_k (U_k + U_k^dag) = (4 - 2K) 1, written on the effect forms
        for b in task.measurements:
            normalizations.append({(b, k): 1.0 for k in task.outcomes(b)})
    effect_rows = [eq.validate_for(task).coefficients() for eq in effect_equivalences]

    for i, a in enumerate(task.preparations):
        name = program.add_hermitian_block(f"G{i}", n)
        names[a] = name
        for r in range(n):
            program.add_equality({(name, r, r): 1.0}, 1.0)
        for u in unitaries:
            iu, iud = basis.index(u), basis.index(u + ADJOINT)
            # Gamma[1, U^dag] = conj(Gamma[1, U])
            program.add_equality({re_entry(name, n, 0, iud): 1.0, re_entry(name, n, 0, iu): -1.0}, 0.0)
            program.add_equality({im_entry(name, n, 0, iud): 1.0, im_entry(name, n, 0, iu): 1.0}, 0.0)
        for combo in normalizations:
            for r in range(n):
                # row r: sum_k (1/2 + (U_k + U_k^dag)/4) = 1 on tr(rho O_r^dag .)
                re = _effect_row_terms(name, basis, r, combo, forms, re_entry)
                re[re_entry(name, n, r, 0)] = re.get(re_entry(name, n, r, 0), 0.0) - 1.0
                program.add_equality(re, 0.0)
                if r > 0:
                    im = _effect_row_terms(name, basis, r, combo, forms, im_entry)
                    im[im_entry(name, n, r, 0)] = im.get(im_entry(name, n, r, 0), 0.0) - 1.0
                    program.add_equality(im, 0.0)
        for combo in effect_rows:
            for r in range(n):
                program.add_equality(_effect_row_terms(name, basis, r, combo, forms, re_entry), 0.0)
                if r > 0:
                    program.add_equality(_effect_row_terms(name, basis, r, combo, forms, im_entry), 0.0)

    # whole blocks vanish in preparation combinations; the diagonal is fixed and
    # Gamma[1, U^dag] follows from Gamma[1, U]
    skip = [(r, r) for r in range(n)] + [(0, basis.index(u + ADJOINT)) for u in unitaries]
    for eq in prep_equivalences:
        eq.validate_for(task)
        terms = [(names[label], c) for label, c in eq.coefficients().items()]
        add_hermitian_combination(program, terms, n, skip_entries=skip)

    for (a, b, k), w in metric.weights.items():
        const, sign, u = forms[(b, k)]
        program.add_objective(
            {
                re_entry(names[a], n, 0, basis.index(u)): w * sign / 4,
                re_entry(names[a], n, 0, basis.index(u + ADJOINT)): w * sign / 4,
            },
            w * const,
        )
    program.add_objective({}, metric.constant_offset)
    return MomentMatrixProgram(task, basis, names, forms, program)


# ============ SOLVING ============

def outer_bound_u1(
    task: TaskSpec,
    metric: SuccessMetric,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
    effect_equivalences: Sequence[OperationalEquivalence] = (),
) -> Tuple[float, MomentMatrixProgram]:
    """Level-1 upper bound, valid in every Hilbert-space dimension."""
    if metric.task != task:
        raise ValueError(f"metric for {metric.task.name} used with {task.name}")
    program = build_program(task, metric, prep_equivalences, effect_equivalences)
    report = solve_sdp(program.sdp).raise_for_status()
    program.gammas = {a: hermitian_unembed(report.primal[name]) for a, name in program.block_names.items()}
    logger.info(f"✅ level-1 bound {task.name}: {report.value:.9f} ({len(program.sdp.equalities)} equalities)")
    return report.value, program


def outer_feasible(
    task: TaskSpec,
    behavior: Behavior,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
    effect_equivalences: Sequence[OperationalEquivalence] = (),
) -> bool:
    """Whether the level-1 program admits the given probabilities."""
    program = build_program(task, zero_metric(task), prep_equivalences, effect_equivalences)
    n = len(program.basis)
    for a, name in program.block_names.items():
        for b in task.measurements:
            if not behavior.defines(a, b):
                continue
            # the last outcome follows from normalization
            for k in task.outcomes(b)[:-1]:
                const, sign, u = program.forms[(b, k)]
                program.sdp.add_equality(
                    {
                        re_entry(name, n, 0, program.basis.index(u)): sign / 4,
                        re_entry(name, n, 0, program.basis.index(u + ADJOINT)): sign / 4,
                    },
                    behavior.p(a, b, k) - const,
                )
    report = solve_sdp(program.sdp)
    if report.status == OPTIMAL:
        return True
    if report.status == INFEASIBLE:
        return False
    raise SolverFailure(report.status, report.diagnostics)
