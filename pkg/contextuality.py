"""
Contextuality Module
====================
Noncontextual models over the finite set of extremal response functions.

Key design principles:
1. A vertex assigns a probability to every effect (b, k); without effect
   equivalences the vertices are the deterministic assignments
2. With effect equivalences the polytope is enumerated exactly
   (basic feasible solutions over sympy rationals)
3. Epistemic weights nu[a, kappa] are the LP variables; rows follow the
   order data, normalization, equivalence
4. The last outcome of every (a, b) is implied by normalization and is
   left out of the data rows, which fixes the gauge of certificates
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import sympy
from tqdm import tqdm

from bounds_config import LP_CONFIG, SEARCH_BUDGETS, TOLERANCES
from bounds_errors import CertificateError, ConstraintInfeasibleError, ModelValidationError, SearchBudgetError
from conic_backend import MAXIMIZE, MINIMIZE, OPTIMAL, LinearProgram, solve_lp
from game_core import (
    PREPARATION,
    Behavior,
    EffectLabel,
    EntryKey,
    Label,
    OperationalEquivalence,
    SuccessMetric,
    TaskSpec,
    format_key,
)

logger = logging.getLogger("contextuality")


# ============ VERTICES ============

@dataclass(frozen=True)
class VertexSet:
    """Extremal response functions; vertices[i][e] is the value on effect_labels[e]."""
    task: TaskSpec
    effect_labels: Tuple[EffectLabel, ...]
    vertices: Tuple[Tuple[sympy.Rational, ...], ...]

    def __post_init__(self):
        groups: Dict[Label, List[int]] = {}
        for e, (b, _) in enumerate(self.effect_labels):
            groups.setdefault(b, []).append(e)
        for vertex in self.vertices:
            if len(vertex) != len(self.effect_labels) or any(v < 0 for v in vertex):
                raise ModelValidationError(f"invalid response function {vertex}")
            for b, idx in groups.items():
                if sum(vertex[e] for e in idx) != 1:
                    raise ModelValidationError(f"response function is not normalized on {b}")
        if len(set(self.vertices)) != len(self.vertices):
            raise ModelValidationError("vertices must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.vertices)

    def as_array(self) -> np.ndarray:
        """Float matrix, one row per vertex."""
        return np.array([[float(v) for v in vertex] for vertex in self.vertices])

    def column(self, label: EffectLabel) -> np.ndarray:
        """xi_kappa(b, k) across all vertices."""
        e = self.effect_labels.index(label)
        return np.array([float(vertex[e]) for vertex in self.vertices])


def _exact(weight: float) -> sympy.Rational:
    return sympy.Rational(weight).limit_denominator(10**6)


def _deterministic_vertices(task: TaskSpec) -> List[Tuple[sympy.Rational, ...]]:
    labels = task.effect_labels()
    position = {label: e for e, label in enumerate(labels)}
    vertices = []
    for choice in product(*(task.outcomes(b) for b in task.measurements)):
        vertex = [sympy.S.Zero] * len(labels)
        for b, k in zip(task.measurements, choice):
            vertex[position[(b, k)]] = sympy.S.One
        vertices.append(tuple(vertex))
    return vertices


def extreme_points(A: sympy.Matrix, c: sympy.Matrix, budget: int) -> List[Tuple[sympy.Rational, ...]]:
    """
    Vertices of {x >= 0 : A x = c} as basic feasible solutions: every set of
    rank(A) linearly independent columns is solved exactly and kept when the
    solution is nonnegative.
    """
    reduced, pivots = A.row_join(c).rref()
    if A.cols in pivots:
        raise ConstraintInfeasibleError("effect equivalences leave no response function")
    rank = len(pivots)
    A, c = reduced[:rank, :A.cols], reduced[:rank, A.cols]
    candidates = math.comb(A.cols, rank)
    if candidates > budget:
        raise SearchBudgetError("vertex enumeration", candidates, budget)

    points = set()
    for basis in tqdm(combinations(range(A.cols), rank), total=candidates, desc="Basic solutions",
                      disable=candidates < SEARCH_BUDGETS["progress_threshold"]):
        B = A[:, list(basis)]
        if B.det() == 0:
            continue
        x_basis = B.LUsolve(c)
        if any(v < 0 for v in x_basis):
            continue
        x = [sympy.S.Zero] * A.cols
        for i, v in zip(basis, x_basis):
            x[i] = v
        points.add(tuple(x))
    return sorted(points)


def enumerate_vertices(
    task: TaskSpec,
    effect_equivalences: Sequence[OperationalEquivalence] = (),
    budget: Optional[int] = None,
) -> VertexSet:
    """Extremal points of the response-function polytope."""
    budget = SEARCH_BUDGETS["vertices"] if budget is None else budget
    labels = task.effect_labels()
    if not effect_equivalences:
        count = 1
        for b in task.measurements:
            count *= len(task.outcomes(b))
        if count > budget:
            raise SearchBudgetError("vertex enumeration", count, budget)
        vertices = _deterministic_vertices(task)
    else:
        position = {label: e for e, label in enumerate(labels)}
        rows, rhs = [], []
        for b in task.measurements:
            row = [sympy.S.Zero] * len(labels)
            for k in task.outcomes(b):
                row[position[(b, k)]] = sympy.S.One
            rows.append(row)
            rhs.append(sympy.S.One)
        for eq in effect_equivalences:
            eq.validate_for(task)
            row = [sympy.S.Zero] * len(labels)
            for label, coeff in eq.coefficients().items():
                row[position[task.check_effect(label)]] += _exact(coeff)
            rows.append(row)
            rhs.append(sympy.S.Zero)
        vertices = extreme_points(sympy.Matrix(rows), sympy.Matrix(rhs), budget)
    logger.info(f"✅ {len(vertices)} vertices for {task.name} ({len(effect_equivalences)} effect equivalences)")
    return VertexSet(task, tuple(labels), tuple(vertices))


# ============ NONCONTEXTUAL MODELS ============

@dataclass
class NCModel:
    """Epistemic weights nu[a] over the vertices, one distribution per preparation."""
    vertices: VertexSet
    weights: Dict[Label, np.ndarray]

    def behavior(self) -> Behavior:
        task = self.vertices.task
        table = self.vertices.as_array()
        probs: Dict[EntryKey, float] = {}
        for a, nu in self.weights.items():
            values = np.clip(nu, 0.0, None) @ table
            for e, (b, k) in enumerate(self.vertices.effect_labels):
                probs[(a, b, k)] = float(values[e])
        return Behavior(task, probs, tol=1e-7)


def _equivalence_rows(
    task: TaskSpec,
    n_vertices: int,
    prep_equivalences: Sequence[OperationalEquivalence],
) -> List[Dict[int, float]]:
    """Per equivalence and vertex: sum_a c_a nu[a, kappa] = 0."""
    rows = []
    for eq in prep_equivalences:
        if eq.kind != PREPARATION:
            raise ModelValidationError("noncontextual models take preparation equivalences here")
        eq.validate_for(task)
        coeffs = eq.coefficients()
        for kappa in range(n_vertices):
            rows.append({task.prep_index[a] * n_vertices + kappa: c for a, c in coeffs.items() if c})
    return rows


def _to_matrix(rows: List[Dict[int, float]], width: int) -> sp.csr_matrix:
    r_idx, c_idx, vals = [], [], []
    for r, row in enumerate(rows):
        for c, v in row.items():
            r_idx.append(r)
            c_idx.append(c)
            vals.append(v)
    return sp.csr_matrix((vals, (r_idx, c_idx)), shape=(len(rows), width))


def _base_rows(task: TaskSpec, vertices: VertexSet, prep_equivalences) -> Tuple[List[Dict[int, float]], List[Dict[int, float]]]:
    V = len(vertices)
    normalization = [{i * V + kappa: 1.0 for kappa in range(V)} for i in range(len(task.preparations))]
    return normalization, _equivalence_rows(task, V, prep_equivalences)


def nc_max(
    task: TaskSpec,
    metric: SuccessMetric,
    vertices: VertexSet,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
) -> float:
    """LP maximum of the metric over noncontextual behaviors."""
    if metric.task != task or vertices.task != task:
        raise ValueError(f"metric/vertices do not belong to {task.name}")
    V = len(vertices)
    n_vars = len(task.preparations) * V
    objective = np.zeros(n_vars)
    for (a, b, k), w in metric.weights.items():
        i = task.prep_index[a]
        objective[i * V:(i + 1) * V] += w * vertices.column((b, k))
    normalization, equivalences = _base_rows(task, vertices, prep_equivalences)
    rows = normalization + equivalences
    lp = LinearProgram(
        objective=objective,
        A_eq=_to_matrix(rows, n_vars),
        b_eq=np.array([1.0] * len(normalization) + [0.0] * len(equivalences)),
        sense=MAXIMIZE,
    )
    report = solve_lp(lp).raise_for_status()
    value = report.value + metric.constant_offset
    logger.info(f"✅ noncontextual max {task.name}: {value:.9f} ({n_vars} variables)")
    return value


# ============ FEASIBILITY AND CERTIFICATES ============

@dataclass
class FarkasCertificate:
    """sum coeff * p <= bound holds for every noncontextual behavior."""
    task: TaskSpec
    coefficients: Dict[EntryKey, float]
    bound: float
    achieved: float
    program: Optional[LinearProgram] = field(default=None, repr=False, compare=False)

    @property
    def ratio(self) -> float:
        return self.achieved / self.bound if self.bound else float("inf")

    def evaluate(self, behavior: Behavior) -> float:
        return sum(c * behavior.p(a, b, k) for (a, b, k), c in self.coefficients.items())

    def to_dict(self) -> Dict:
        return {
            "task": [self.task.n, self.task.m],
            "coefficients": {format_key(self.task, key): c for key, c in self.coefficients.items()},
            "bound": self.bound,
            "achieved": self.achieved,
        }

    def format_inequality(self, precision: int = 6, cutoff: float = 1e-9) -> str:
        """One line per measurement, terms ordered by preparation."""
        lines = []
        for b in self.task.measurements:
            terms = [
                f"{c:+.{precision}f} {format_key(self.task, (a, bb, k))}"
                for (a, bb, k), c in sorted(self.coefficients.items())
                if bb == b and abs(c) > cutoff
            ]
            if terms:
                lines.append(" ".join(terms))
        return "\n".join(lines) + f"\n<= {self.bound:.{precision}f}"


@dataclass
class FeasibilityResult:
    feasible: bool
    distance: float
    model: Optional[NCModel] = None
    certificate: Optional[FarkasCertificate] = None
    program: Optional[LinearProgram] = None


def _data_rows(behavior: Behavior, vertices: VertexSet) -> Tuple[List[Dict[int, float]], List[float], List[EntryKey]]:
    """p(k|a,b) = sum_kappa xi_kappa(b,k) nu[a,kappa], all outcomes but the last."""
    task = behavior.task
    V = len(vertices)
    rows, rhs, keys = [], [], []
    for a in task.preparations:
        i = task.prep_index[a]
        for b in task.measurements:
            if not behavior.defines(a, b):
                continue
            for k in task.outcomes(b)[:-1]:
                column = vertices.column((b, k))
                rows.append({i * V + kappa: v for kappa, v in enumerate(column) if v})
                rhs.append(behavior.p(a, b, k))
                keys.append((a, b, k))
    return rows, rhs, keys


def _slack_program(behavior: Behavior, vertices: VertexSet, prep_equivalences) -> Tuple[LinearProgram, int]:
    """min sum(s+ + s-) s.t. data rows + s+ - s- = p, normalization, equivalences."""
    task = behavior.task
    data, rhs, _ = _data_rows(behavior, vertices)
    normalization, equivalences = _base_rows(task, vertices, prep_equivalences)
    n_nu = len(task.preparations) * len(vertices)
    n_data = len(data)
    width = n_nu + 2 * n_data
    rows = []
    for r, row in enumerate(data):
        row = dict(row)
        row[n_nu + r] = 1.0
        row[n_nu + n_data + r] = -1.0
        rows.append(row)
    rows += normalization + equivalences
    objective = np.concatenate([np.zeros(n_nu), np.ones(2 * n_data)])
    b_eq = np.array(rhs + [1.0] * len(normalization) + [0.0] * len(equivalences))
    return LinearProgram(objective=objective, A_eq=_to_matrix(rows, width), b_eq=b_eq, sense=MINIMIZE), n_nu


def nc_distance(
    behavior: Behavior,
    vertices: VertexSet,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
) -> float:
    """Minimum L1 distance (over the independent entries) to a noncontextual behavior."""
    lp, _ = _slack_program(behavior, vertices, prep_equivalences)
    return solve_lp(lp).raise_for_status().value


def _farkas_program(
    behavior: Behavior,
    vertices: VertexSet,
    prep_equivalences,
    normalize: bool,
) -> Tuple[LinearProgram, int, int, List[EntryKey]]:
    """
    min b*^T y  s.t.  M^T y >= 0, |y| <= box, and (normalize) sum of the
    normalization components of y = 1.
    """
    task = behavior.task
    data, rhs, keys = _data_rows(behavior, vertices)
    normalization, equivalences = _base_rows(task, vertices, prep_equivalences)
    n_nu = len(task.preparations) * len(vertices)
    M = _to_matrix(data + normalization + equivalences, n_nu)
    b_star = np.array(rhs + [1.0] * len(normalization) + [0.0] * len(equivalences))
    n_y = M.shape[0]
    box = LP_CONFIG["farkas_box"] if normalize else 1.0
    A_eq = b_eq = None
    if normalize:
        selector = np.zeros((1, n_y))
        selector[0, len(data):len(data) + len(normalization)] = 1.0
        A_eq, b_eq = selector, np.array([1.0])
    lp = LinearProgram(
        objective=b_star,
        A_eq=A_eq,
        b_eq=b_eq,
        A_in=M.T.tocsr(),
        b_in=np.zeros(n_nu),
        in_senses=[">="] * n_nu,
        bounds=[(-box, box)] * n_y,
        sense=MINIMIZE,
    )
    return lp, len(data), len(normalization), keys


def farkas_certificate(
    behavior: Behavior,
    vertices: VertexSet,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
    tol: Optional[float] = None,
) -> FarkasCertificate:
    """Inequality valid on every noncontextual behavior and violated by this one."""
    tol = TOLERANCES["nc_slack"] if tol is None else tol
    task = behavior.task
    for normalize in (True, False):
        lp, n_data, n_norm, keys = _farkas_program(behavior, vertices, prep_equivalences, normalize)
        report = solve_lp(lp)
        if report.status == OPTIMAL and report.value < -tol:
            break
        if normalize:
            logger.warning(f"⚠️ normalized certificate LP gave {report.status}, falling back to the plain box")
    report.raise_for_status()
    y = report.primal
    coefficients = {key: float(-y[r]) for r, key in enumerate(keys)}
    bound = float(np.sum(y[n_data:n_data + n_norm]))
    if bound > 0:
        coefficients = {key: c / bound for key, c in coefficients.items()}
        bound = 1.0
    cert = FarkasCertificate(task, coefficients, bound, 0.0, program=lp)
    cert.achieved = cert.evaluate(behavior)
    if cert.achieved <= cert.bound + tol * max(1.0, abs(cert.bound)):
        raise CertificateError(cert.bound, cert.achieved)
    return cert


def nc_feasibility(
    behavior: Behavior,
    vertices: VertexSet,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
    tol: Optional[float] = None,
) -> FeasibilityResult:
    """Noncontextual model for the behavior, or a violated inequality."""
    if behavior.task != vertices.task:
        raise ValueError("behavior and vertices belong to different tasks")
    tol = TOLERANCES["nc_slack"] if tol is None else tol
    lp, n_nu = _slack_program(behavior, vertices, prep_equivalences)
    report = solve_lp(lp).raise_for_status()
    distance = report.value
    if distance <= tol:
        V = len(vertices)
        weights = {a: report.primal[i * V:(i + 1) * V].copy() for i, a in enumerate(behavior.task.preparations)}
        logger.info(f"✅ noncontextual model found (slack {distance:.2e})")
        return FeasibilityResult(True, distance, model=NCModel(vertices, weights), program=lp)

    cert = farkas_certificate(behavior, vertices, prep_equivalences, tol)
    logger.info(f"❌ no noncontextual model: inequality reaches {cert.achieved:.9f} against bound {cert.bound:.9f}")
    return FeasibilityResult(False, distance, certificate=cert, program=lp)


# ============ BEHAVIOR-LEVEL BOUND ============

def behavior_lp_bound(
    task: TaskSpec,
    metric: SuccessMetric,
    prep_equivalences: Sequence[OperationalEquivalence] = (),
) -> float:
    """Metric maximum over all normalized, nonnegative behaviors respecting the equivalences."""
    keys = [(a, b, k) for a in task.preparations for b, k in task.effect_labels()]
    index = {key: i for i, key in enumerate(keys)}
    objective = np.zeros(len(keys))
    for key, w in metric.weights.items():
        objective[index[key]] += w
    rows = []
    for a in task.preparations:
        for b in task.measurements:
            rows.append(({index[(a, b, k)]: 1.0 for k in task.outcomes(b)}, 1.0))
    for eq in prep_equivalences:
        eq.validate_for(task)
        coeffs = eq.coefficients()
        for b, k in task.effect_labels():
            rows.append(({index[(a, b, k)]: c for a, c in coeffs.items() if c}, 0.0))
    lp = LinearProgram(
        objective=objective,
        A_eq=_to_matrix([r for r, _ in rows], len(keys)),
        b_eq=np.array([rhs for _, rhs in rows]),
        sense=MAXIMIZE,
    )
    value = solve_lp(lp).raise_for_status().value + metric.constant_offset
    logger.info(f"✅ behavior-level bound {task.name}: {value:.9f}")
    return value
