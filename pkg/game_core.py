"""
Game Core Module
================
The partial-ignorance task family T_{n,m}: scenario enumeration, labels,
success metrics, and the behavior / model / equivalence value types every
solver shares.

Labels are canonical sorted index tuples, never bit strings:
- preparation label: the m zero positions revealed to Alice
- measurement label: the n-1-m zero positions revealed to Bob
- outcome label: a raw index outside the measurement label (Bob's guess)

Bit-string and 1-based renderings are formatting helpers only.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from bounds_config import TOLERANCES
from bounds_errors import (
    MissingLabelError,
    ModelValidationError,
    TaskConstraintError,
)

logger = logging.getLogger("game_core")

Label = Tuple[int, ...]
EntryKey = Tuple[Label, Label, int]
EffectLabel = Tuple[Label, int]

PREPARATION = "preparation"
EFFECT = "effect"


def as_label(indices: Iterable[int]) -> Label:
    """Canonical form of an index set."""
    return tuple(sorted(int(i) for i in indices))


# ============ TASK ============

@dataclass(frozen=True)
class TaskSpec:
    """
    T_{n,m}: Charlie hides a 1 in an n-bit string, Alice learns m zero
    positions, Bob learns the remaining n-1-m and guesses the 1.
    """
    n: int
    m: int

    def __post_init__(self):
        if any(isinstance(v, bool) or not isinstance(v, int) for v in (self.n, self.m)):
            raise TaskConstraintError(f"n and m must be integers, got ({self.n!r}, {self.m!r})")
        if self.m < 1 or self.m > self.n - 1:
            raise TaskConstraintError(f"T_{{{self.n},{self.m}}} needs 1 <= m <= n-1")

    @property
    def name(self) -> str:
        return f"T_{{{self.n},{self.m}}}"

    @property
    def num_outcomes(self) -> int:
        return self.m + 1

    @property
    def is_binary(self) -> bool:
        return self.m == 1

    @cached_property
    def preparations(self) -> List[Label]:
        return list(combinations(range(self.n), self.m))

    @cached_property
    def measurements(self) -> List[Label]:
        return list(combinations(range(self.n), self.n - 1 - self.m))

    @cached_property
    def scenarios(self) -> List["ScenarioRow"]:
        return enumerate_scenarios(self)

    @cached_property
    def prep_index(self) -> Dict[Label, int]:
        return {a: i for i, a in enumerate(self.preparations)}

    @cached_property
    def meas_index(self) -> Dict[Label, int]:
        return {b: j for j, b in enumerate(self.measurements)}

    @property
    def row_count(self) -> int:
        return self.n * math.comb(self.n - 1, self.m)

    def outcomes(self, b: Sequence[int]) -> Tuple[int, ...]:
        """Outcome set of measurement b: the m+1 indices outside b, ascending."""
        b = self.check_measurement(b)
        return tuple(i for i in range(self.n) if i not in b)

    def effect_labels(self) -> List[EffectLabel]:
        return [(b, k) for b in self.measurements for k in self.outcomes(b)]

    def message_bits_for_perfect(self) -> int:
        """Bits that let Alice name her input exactly."""
        return max(1, math.ceil(math.log2(math.comb(self.n, self.m))))

    def check_preparation(self, a: Sequence[int]) -> Label:
        label = as_label(a)
        if label not in self.prep_index:
            raise TaskConstraintError(f"{label} is not a preparation label of {self.name}")
        return label

    def check_measurement(self, b: Sequence[int]) -> Label:
        label = as_label(b)
        if label not in self.meas_index:
            raise TaskConstraintError(f"{label} is not a measurement label of {self.name}")
        return label

    def check_key(self, key: Sequence) -> EntryKey:
        a, b, k = key
        a = self.check_preparation(a)
        b = self.check_measurement(b)
        k = int(k)
        if k not in self.outcomes(b):
            raise TaskConstraintError(f"outcome {k} is not in the outcome set of {b}")
        return (a, b, k)

    def check_effect(self, label: Sequence) -> EffectLabel:
        b, k = label
        _, b, k = self.check_key((self.preparations[0], b, k))
        return (b, k)


@dataclass(frozen=True)
class ScenarioRow:
    """One (s, a, b) row; a, b and {s} partition {0..n-1}."""
    s: int
    a: Label
    b: Label

    @property
    def key(self) -> EntryKey:
        return (self.a, self.b, self.s)


def enumerate_scenarios(task: TaskSpec) -> List[ScenarioRow]:
    """All rows in lexicographic order of (s, sorted a)."""
    rows = []
    for s in range(task.n):
        rest = [i for i in range(task.n) if i != s]
        for a in combinations(rest, task.m):
            b = tuple(i for i in rest if i not in a)
            rows.append(ScenarioRow(s=s, a=a, b=b))
    return rows


# ============ METRICS ============

@dataclass(frozen=True)
class SuccessMetric:
    """Objective sum_{a,b,k} w(a,b,k) p(k|a,b) + constant_offset."""
    task: TaskSpec
    weights: Dict[EntryKey, float]
    constant_offset: float = 0.0

    def __post_init__(self):
        clean: Dict[EntryKey, float] = {}
        for key, weight in dict(self.weights).items():
            key = self.task.check_key(key)
            clean[key] = clean.get(key, 0.0) + float(weight)
        object.__setattr__(self, "weights", clean)
        object.__setattr__(self, "constant_offset", float(self.constant_offset))

    def __len__(self) -> int:
        return len(self.weights)

    def is_zero(self) -> bool:
        return not any(self.weights.values()) and self.constant_offset == 0.0


def canonical_metric(task: TaskSpec) -> SuccessMetric:
    """Weight 1 on (a, b, s) for every scenario row."""
    return SuccessMetric(task, {row.key: 1.0 for row in task.scenarios})


def zero_metric(task: TaskSpec) -> SuccessMetric:
    return SuccessMetric(task, {})


def signed_metric(task: TaskSpec) -> SuccessMetric:
    """
    Signed form for binary tasks: every row contributes +p(first|a,b) when s is
    the first outcome of b and -p(first|a,b) otherwise.
    Equals the canonical value minus the number of negative rows.
    """
    if not task.is_binary:
        raise TaskConstraintError(f"signed metric needs binary outcomes, {task.name} has {task.num_outcomes}")
    weights: Dict[EntryKey, float] = {}
    for row in task.scenarios:
        first = task.outcomes(row.b)[0]
        sign = 1.0 if row.s == first else -1.0
        weights[(row.a, row.b, first)] = weights.get((row.a, row.b, first), 0.0) + sign
    return SuccessMetric(task, weights)


def signed_metric_t41() -> SuccessMetric:
    return signed_metric(TaskSpec(4, 1))


def negative_row_count(task: TaskSpec) -> int:
    """Rows whose signed term is negative (s is not the first outcome)."""
    return sum(1 for row in task.scenarios if row.s != task.outcomes(row.b)[0])


# ============ BEHAVIORS ============

@dataclass(frozen=True)
class Behavior:
    """
    Table p(k | a, b). Every (a, b) present carries all of its outcomes and
    sums to 1 within tol; (a, b) pairs may be absent.
    """
    task: TaskSpec
    probabilities: Dict[EntryKey, float]
    tol: float = field(default=TOLERANCES["normalization"], compare=False)

    def __post_init__(self):
        clean: Dict[EntryKey, float] = {}
        for key, value in dict(self.probabilities).items():
            clean[self.task.check_key(key)] = float(value)
        range_tol = max(self.tol, TOLERANCES["probability_range"])
        groups: Dict[Tuple[Label, Label], List[int]] = {}
        for (a, b, k), value in clean.items():
            if not -range_tol <= value <= 1.0 + range_tol:
                raise ModelValidationError(f"p({k}|{a},{b}) = {value} outside [0, 1]")
            groups.setdefault((a, b), []).append(k)
        for (a, b), present in groups.items():
            expected = self.task.outcomes(b)
            if sorted(present) != list(expected):
                raise ModelValidationError(f"p(.|{a},{b}) lacks outcomes {set(expected) - set(present)}")
            total = sum(clean[(a, b, k)] for k in expected)
            if abs(total - 1.0) > self.tol:
                raise ModelValidationError(f"p(.|{a},{b}) sums to {total}")
        object.__setattr__(self, "probabilities", clean)

    def p(self, a: Label, b: Label, k: int) -> float:
        try:
            return self.probabilities[(as_label(a), as_label(b), int(k))]
        except KeyError:
            raise MissingLabelError(f"behavior has no entry p({k}|{a},{b})") from None

    def defines(self, a: Label, b: Label) -> bool:
        b = as_label(b)
        return (as_label(a), b, self.task.outcomes(b)[0]) in self.probabilities

    def is_complete(self) -> bool:
        return len(self.probabilities) == len(self.task.preparations) * len(self.task.effect_labels())


def evaluate_metric(metric: SuccessMetric, behavior: Behavior) -> float:
    if metric.task != behavior.task:
        raise TaskConstraintError(f"metric for {metric.task.name} evaluated on {behavior.task.name}")
    total = metric.constant_offset
    for (a, b, k), weight in metric.weights.items():
        total += weight * behavior.p(a, b, k)
    return total


def uniform_behavior(task: TaskSpec) -> Behavior:
    share = 1.0 / task.num_outcomes
    return Behavior(task, {(a, b, k): share for a in task.preparations for b, k in task.effect_labels()})


def random_behavior(task: TaskSpec, rng: np.random.Generator) -> Behavior:
    probs: Dict[EntryKey, float] = {}
    for a in task.preparations:
        for b in task.measurements:
            outs = task.outcomes(b)
            row = rng.dirichlet(np.ones(len(outs)))
            row[-1] = 1.0 - row[:-1].sum()
            for k, value in zip(outs, row):
                probs[(a, b, k)] = float(value)
    return Behavior(task, probs)


def worst_scenario(task: TaskSpec, behavior: Behavior) -> Tuple[ScenarioRow, float]:
    """Row with the smallest success probability p(s|a,b)."""
    return min(((row, behavior.p(*row.key)) for row in task.scenarios), key=lambda item: item[1])


# ============ QUANTUM MODELS ============

def _hermitize(matrix, d: int, tol: float, what: str) -> np.ndarray:
    arr = np.array(matrix, dtype=complex)
    if arr.shape != (d, d):
        raise ModelValidationError(f"{what} has shape {arr.shape}, expected {(d, d)}")
    deviation = np.max(np.abs(arr - arr.conj().T))
    if deviation > tol:
        raise ModelValidationError(f"{what} is not Hermitian (deviation {deviation:.2e})")
    arr = (arr + arr.conj().T) / 2
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """Density matrices per preparation and ordered POVMs per measurement, dimension d."""
    task: TaskSpec
    dimension: int
    states: Dict[Label, np.ndarray]
    povms: Dict[Label, Tuple[np.ndarray, ...]]
    tol: float = TOLERANCES["psd_eigenvalue"]

    def __post_init__(self):
        d = self.dimension
        if d < 1:
            raise ModelValidationError(f"dimension must be positive, got {d}")
        states: Dict[Label, np.ndarray] = {}
        for a, rho in dict(self.states).items():
            a = self.task.check_preparation(a)
            rho = _hermitize(rho, d, TOLERANCES["hermitian"], f"state {a}")
            if np.linalg.eigvalsh(rho).min() < -self.tol:
                raise ModelValidationError(f"state {a} is not positive semidefinite")
            if abs(np.trace(rho).real - 1.0) > self.tol:
                raise ModelValidationError(f"state {a} has trace {np.trace(rho).real}")
            states[a] = rho
        povms: Dict[Label, Tuple[np.ndarray, ...]] = {}
        for b, effects in dict(self.povms).items():
            b = self.task.check_measurement(b)
            if len(effects) != self.task.num_outcomes:
                raise ModelValidationError(f"POVM {b} has {len(effects)} effects, expected {self.task.num_outcomes}")
            clean = tuple(_hermitize(e, d, TOLERANCES["hermitian"], f"effect {b}[{i}]") for i, e in enumerate(effects))
            for i, e in enumerate(clean):
                if np.linalg.eigvalsh(e).min() < -self.tol:
                    raise ModelValidationError(f"effect {b}[{i}] is not positive semidefinite")
            if np.max(np.abs(sum(clean) - np.eye(d))) > TOLERANCES["povm_identity"]:
                raise ModelValidationError(f"effects of {b} do not sum to the identity")
            povms[b] = clean
        missing_states = set(self.task.preparations) - set(states)
        missing_povms = set(self.task.measurements) - set(povms)
        if missing_states or missing_povms:
            raise ModelValidationError(f"model lacks states {sorted(missing_states)} / POVMs {sorted(missing_povms)}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "povms", povms)

    def effect(self, b: Label, k: int) -> np.ndarray:
        b = as_label(b)
        return self.povms[b][self.task.outcomes(b).index(int(k))]


def behavior_of(model: QuantumModel) -> Behavior:
    """p(k|a,b) = tr(rho_a M_b(k))."""
    task = model.task
    probs: Dict[EntryKey, float] = {}
    for a, rho in model.states.items():
        for b, effects in model.povms.items():
            for k, effect in zip(task.outcomes(b), effects):
                value = np.trace(rho @ effect)
                if abs(value.imag) > TOLERANCES["imaginary_residue"]:
                    raise ModelValidationError(f"tr(rho_{a} M_{b}({k})) has imaginary part {value.imag:.2e}")
                probs[(a, b, k)] = min(max(float(value.real), 0.0), 1.0)
    # valid models sum to 1 only up to d times the effect tolerance
    row_tol = max(TOLERANCES["normalization"], model.dimension * model.tol)
    return Behavior(task, probs, tol=row_tol)


def project_state(rho: np.ndarray) -> np.ndarray:
    """Nearest-in-spectrum density matrix: symmetrize, clip eigenvalues, renormalize."""
    rho = (np.asarray(rho, dtype=complex) + np.asarray(rho, dtype=complex).conj().T) / 2
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        w = np.ones_like(w)
    w = w / w.sum()
    return (v * w) @ v.conj().T


def _inverse_sqrt(matrix: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(matrix)
    return (v / np.sqrt(w)) @ v.conj().T


def project_povm(effects: Sequence[np.ndarray]) -> Tuple[np.ndarray, ...]:
    """Clip effects to PSD and renormalize with S^{-1/2} E S^{-1/2} so they sum to I."""
    clipped = []
    for e in effects:
        e = (np.asarray(e, dtype=complex) + np.asarray(e, dtype=complex).conj().T) / 2
        w, v = np.linalg.eigh(e)
        clipped.append((v * np.clip(w, 0.0, None)) @ v.conj().T)
    root = _inverse_sqrt(sum(clipped))
    return tuple(root @ e @ root for e in clipped)


def haar_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    vec = rng.normal(size=d) + 1j * rng.normal(size=d)
    vec /= np.linalg.norm(vec)
    return np.outer(vec, vec.conj())


def random_povm(d: int, outcomes: int, rng: np.random.Generator) -> Tuple[np.ndarray, ...]:
    """Random full-rank positive operators rescaled by S^{-1/2} to sum to I."""
    raw = []
    for _ in range(outcomes):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        raw.append(g @ g.conj().T)
    root = _inverse_sqrt(sum(raw))
    return tuple(root @ e @ root for e in raw)


def random_model(task: TaskSpec, d: int, rng: np.random.Generator) -> QuantumModel:
    states = {a: haar_pure_state(d, rng) for a in task.preparations}
    povms = {b: random_povm(d, task.num_outcomes, rng) for b in task.measurements}
    return QuantumModel(task, d, states, povms)


# ============ OPERATIONAL EQUIVALENCES ============

@dataclass(frozen=True)
class OperationalEquivalence:
    """
    sum side_a w * X  ==  sum side_b w * X  over preparations
    (labels are preparation labels) or effects (labels are (b, k) pairs).
    """
    kind: str
    side_a: Dict
    side_b: Dict

    def __post_init__(self):
        if self.kind not in (PREPARATION, EFFECT):
            raise ModelValidationError(f"unknown equivalence kind '{self.kind}'")
        tol = TOLERANCES["convex_weight"]
        for side_name in ("side_a", "side_b"):
            side = {}
            for label, weight in dict(getattr(self, side_name)).items():
                label = as_label(label) if self.kind == PREPARATION else (as_label(label[0]), int(label[1]))
                if weight < 0:
                    raise ModelValidationError(f"negative weight {weight} on {label}")
                side[label] = side.get(label, 0.0) + float(weight)
            if not side or abs(sum(side.values()) - 1.0) > tol:
                raise ModelValidationError(f"{side_name} weights sum to {sum(side.values())}, expected 1")
            object.__setattr__(self, side_name, side)

    def coefficients(self) -> Dict:
        """Signed combination side_a - side_b that must vanish."""
        coeffs = dict(self.side_a)
        for label, weight in self.side_b.items():
            coeffs[label] = coeffs.get(label, 0.0) - weight
        return coeffs

    def validate_for(self, task: TaskSpec) -> "OperationalEquivalence":
        for label in list(self.side_a) + list(self.side_b):
            if self.kind == PREPARATION:
                task.check_preparation(label)
            else:
                task.check_effect(label)
        return self


def check_equivalence(
    model: QuantumModel,
    eq: OperationalEquivalence,
    tol: float = TOLERANCES["equivalence_check"],
) -> bool:
    eq.validate_for(model.task)

    def operator(label) -> np.ndarray:
        return model.states[label] if eq.kind == PREPARATION else model.effect(*label)

    diff = sum(weight * operator(label) for label, weight in eq.coefficients().items())
    return bool(np.max(np.abs(diff)) <= tol)


# ============ FORMATTING ============

def bitstring(label: Sequence[int], n: int) -> str:
    """Rendering with a 1 at every index in label, e.g. (1, 2) -> '0110' for n=4."""
    members = set(label)
    return "".join("1" if i in members else "0" for i in range(n))


def outcome_position(task: TaskSpec, b: Label, k: int) -> int:
    """1-based rank of outcome k inside the outcome set of b (compressed relabelling)."""
    return task.outcomes(b).index(int(k)) + 1


def format_key(task: TaskSpec, key: EntryKey) -> str:
    a, b, k = key
    return f"p({k + 1}|{bitstring(a, task.n)},{bitstring(b, task.n)})"



def parse_bitstring(bits: str) -> Label:
    """Inverse of bitstring: '0110' -> (1, 2)."""
    if any(ch not in "01" for ch in bits):
        raise ValueError(f"'{bits}' is not a bit string")
    return tuple(i for i, ch in enumerate(bits) if ch == "1")
