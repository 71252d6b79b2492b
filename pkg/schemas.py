"""
JSON schemas for every external interface (pydantic v2) and the converters
between them and the in-memory types.

Conventions:
- labels are 0-based index lists, or bit strings where a dict key is needed
- complex matrices are nested [re, im] pairs
- floats keep their shortest repr, so values round-trip exactly
"""

from datetime import datetime, timezone
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from bounds_config import REPORT_CONFIG, SEESAW_DEFAULTS, TOOLKIT_VERSION
from classical_opt import ClassicalStrategy
from contextuality import FarkasCertificate
from game_core import (
    EFFECT,
    PREPARATION,
    Behavior,
    OperationalEquivalence,
    QuantumModel,
    TaskSpec,
    as_label,
    bitstring,
    parse_bitstring,
)

METHODS = list(REPORT_CONFIG["methods_order"])

ComplexMatrix = List[List[Tuple[float, float]]]


# ============ CORE TYPES ============

class TaskSpecModel(BaseModel):
    n: int
    m: int


class BehaviorEntry(BaseModel):
    a: List[int]
    b: List[int]
    k: int
    p: float


class BehaviorModel(BaseModel):
    task: TaskSpecModel
    entries: List[BehaviorEntry]


class QuantumModelModel(BaseModel):
    task: TaskSpecModel
    dimension: int
    states: Dict[str, ComplexMatrix]          # keyed by preparation bit string
    povms: Dict[str, List[ComplexMatrix]]     # keyed by measurement bit string, outcomes ascending


class WeightedLabel(BaseModel):
    label: List[int]
    outcome: Optional[int] = None             # set for effect equivalences
    weight: float


class EquivalenceModel(BaseModel):
    kind: Literal["preparation", "effect"]
    side_a: List[WeightedLabel]
    side_b: List[WeightedLabel]


class CertificateEntry(BaseModel):
    a: List[int]
    b: List[int]
    k: int
    coefficient: float


class CertificateModel(BaseModel):
    task: TaskSpecModel
    coefficients: List[CertificateEntry]
    bound: float
    achieved: float
    inequality: str = ""


class ClassicalStrategyModel(BaseModel):
    task: TaskSpecModel
    message_bits: int
    encoding: Dict[str, int]                  # preparation bit string -> message
    decoding: Dict[str, List[int]]            # measurement bit string -> guess per message


# ============ EXPERIMENTS AND REPORTS ============

class ExperimentConfig(BaseModel):
    task: Tuple[int, int]
    methods: List[str] = Field(default_factory=list)
    dims: List[int] = Field(default_factory=lambda: [2])
    metric: Literal["canonical", "signed"] = "canonical"
    message_bits: List[int] = Field(default_factory=lambda: [1])
    prep_equivalences: List[EquivalenceModel] = Field(default_factory=list)
    effect_equivalences: List[EquivalenceModel] = Field(default_factory=list)
    seed: int = SEESAW_DEFAULTS["seed"]
    restarts: int = SEESAW_DEFAULTS["restarts"]
    max_rounds: int = SEESAW_DEFAULTS["max_rounds"]
    epsilon: float = SEESAW_DEFAULTS["epsilon"]
    workers: int = SEESAW_DEFAULTS["workers"]
    tolerances: Dict[str, float] = Field(default_factory=dict)
    output: Optional[str] = None

    @field_validator("methods")
    @classmethod
    def expand_methods(cls, value: List[str]) -> List[str]:
        if "all" in value:
            return list(METHODS)
        unknown = [m for m in value if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}, expected some of {METHODS} or 'all'")
        return [m for m in METHODS if m in value]

    @field_validator("dims", "message_bits")
    @classmethod
    def positive(cls, value: List[int]) -> List[int]:
        if any(v < 1 for v in value):
            raise ValueError("dimensions and message bits must be positive")
        return value

    @model_validator(mode="after")
    def check_counts(self) -> "ExperimentConfig":
        if self.restarts < 1 or self.max_rounds < 1 or self.epsilon <= 0 or self.workers < 1:
            raise ValueError("restarts, max_rounds, workers must be >= 1 and epsilon > 0")
        return self


class MethodResult(BaseModel):
    method: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    status: Literal["ok", "failed"] = "ok"
    values: Dict[str, Any] = Field(default_factory=dict)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    artifacts: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None
    elapsed: float = 0.0


class CheckResult(BaseModel):
    name: str
    expected: float
    observed: Optional[float] = None
    tolerance: float = 0.0
    passed: bool = False
    note: str = ""


class Report(BaseModel):
    toolkit_version: str = TOOLKIT_VERSION
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    config: Optional[ExperimentConfig] = None
    results: List[MethodResult] = Field(default_factory=list)
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def has_failures(self) -> bool:
        return any(result.status == "failed" for result in self.results)


# ============ CONVERTERS ============

def task_to_model(task: TaskSpec) -> TaskSpecModel:
    return TaskSpecModel(n=task.n, m=task.m)


def task_from_model(model: TaskSpecModel) -> TaskSpec:
    return TaskSpec(model.n, model.m)


def behavior_to_model(behavior: Behavior) -> BehaviorModel:
    entries = [
        BehaviorEntry(a=list(a), b=list(b), k=k, p=p)
        for (a, b, k), p in sorted(behavior.probabilities.items())
    ]
    return BehaviorModel(task=task_to_model(behavior.task), entries=entries)


def behavior_from_model(model: BehaviorModel) -> Behavior:
    probs = {(as_label(e.a), as_label(e.b), e.k): e.p for e in model.entries}
    return Behavior(task_from_model(model.task), probs)


def _matrix_to_pairs(matrix: np.ndarray) -> ComplexMatrix:
    return [[(float(z.real), float(z.imag)) for z in row] for row in np.asarray(matrix, dtype=complex)]


def _pairs_to_matrix(pairs: ComplexMatrix) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in pairs])


def quantum_model_to_model(model: QuantumModel) -> QuantumModelModel:
    n = model.task.n
    return QuantumModelModel(
        task=task_to_model(model.task),
        dimension=model.dimension,
        states={bitstring(a, n): _matrix_to_pairs(rho) for a, rho in model.states.items()},
        povms={bitstring(b, n): [_matrix_to_pairs(e) for e in effects] for b, effects in model.povms.items()},
    )


def quantum_model_from_model(model: QuantumModelModel) -> QuantumModel:
    return QuantumModel(
        task_from_model(model.task),
        model.dimension,
        {parse_bitstring(bits): _pairs_to_matrix(m) for bits, m in model.states.items()},
        {parse_bitstring(bits): tuple(_pairs_to_matrix(e) for e in effects) for bits, effects in model.povms.items()},
    )


def equivalence_to_model(eq: OperationalEquivalence) -> EquivalenceModel:
    def side(weights: Dict) -> List[WeightedLabel]:
        if eq.kind == PREPARATION:
            return [WeightedLabel(label=list(label), weight=w) for label, w in weights.items()]
        return [WeightedLabel(label=list(b), outcome=k, weight=w) for (b, k), w in weights.items()]

    return EquivalenceModel(kind=eq.kind, side_a=side(eq.side_a), side_b=side(eq.side_b))


def equivalence_from_model(model: EquivalenceModel) -> OperationalEquivalence:
    def side(items: List[WeightedLabel]) -> Dict:
        if model.kind == PREPARATION:
            return {as_label(item.label): item.weight for item in items}
        if any(item.outcome is None for item in items):
            raise ValueError("effect equivalences need an outcome on every label")
        return {(as_label(item.label), item.outcome): item.weight for item in items}

    kind = PREPARATION if model.kind == PREPARATION else EFFECT
    return OperationalEquivalence(kind, side(model.side_a), side(model.side_b))


def certificate_to_model(cert: FarkasCertificate) -> CertificateModel:
    return CertificateModel(
        task=task_to_model(cert.task),
        coefficients=[
            CertificateEntry(a=list(a), b=list(b), k=k, coefficient=c)
            for (a, b, k), c in sorted(cert.coefficients.items())
        ],
        bound=cert.bound,
        achieved=cert.achieved,
        inequality=cert.format_inequality(),
    )


def certificate_from_model(model: CertificateModel) -> FarkasCertificate:
    coefficients = {(as_label(e.a), as_label(e.b), e.k): e.coefficient for e in model.coefficients}
    return FarkasCertificate(task_from_model(model.task), coefficients, model.bound, model.achieved)


def strategy_to_model(strategy: ClassicalStrategy) -> ClassicalStrategyModel:
    task = strategy.task
    messages = 2 ** strategy.message_bits
    return ClassicalStrategyModel(
        task=task_to_model(task),
        message_bits=strategy.message_bits,
        encoding={bitstring(a, task.n): r for a, r in strategy.encoding.items()},
        decoding={
            bitstring(b, task.n): [strategy.decoding[(b, r)] for r in range(messages)]
            for b in task.measurements
        },
    )


def strategy_from_model(model: ClassicalStrategyModel) -> ClassicalStrategy:
    task = task_from_model(model.task)
    decoding = {
        (parse_bitstring(bits), r): guess
        for bits, guesses in model.decoding.items()
        for r, guess in enumerate(guesses)
    }
    encoding = {parse_bitstring(bits): r for bits, r in model.encoding.items()}
    return ClassicalStrategy(task, model.message_bits, encoding, decoding)

