"""
Conic Backend
=============
Thin contract over one LP solver (scipy HiGHS) and one SDP solver (cvxpy with
Clarabel, SCS as fallback). Other modules build problems in the canonical forms
below and never touch the solvers directly.

Canonical SDP form:
- real symmetric matrix blocks addressed by name, entries keyed (block, i, j)
- a scalar vector addressed as (SCALARS, i, 0)
- linear objective and affine equalities over entries
- PSD requirement per block

Complex Hermitian d x d blocks are carried as 2d x 2d real blocks
[[Re H, -Im H], [Im H, Re H]] with the structure imposed by equalities.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from bounds_config import LP_CONFIG, SDP_CONFIG, TOLERANCES
from bounds_errors import NonHermitianError, SolverFailure

logger = logging.getLogger("conic_backend")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"

MAXIMIZE = "maximize"
MINIMIZE = "minimize"

SCALARS = "__scalars__"

Entry = Tuple[str, int, int]


@dataclass
class SolveReport:
    """Backend answer; primal is a vector for LPs and a dict of blocks for SDPs."""
    status: str
    value: Optional[float]
    primal: Any = None
    dual: Optional[Dict[str, np.ndarray]] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    diagnostics: str = ""
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def raise_for_status(self) -> "SolveReport":
        if self.status != OPTIMAL:
            raise SolverFailure(self.status, self.diagnostics)
        return self


# ============ LINEAR PROGRAMS ============

@dataclass
class LinearProgram:
    """
    optimize c^T x  s.t.  A_eq x = b_eq,  A_in x (sense) b_in,  bounds.
    sense per inequality row is '<=' or '>='; bounds default to x >= 0.
    """
    objective: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_in: Optional[np.ndarray] = None
    b_in: Optional[np.ndarray] = None
    in_senses: Optional[Sequence[str]] = None
    bounds: Optional[Sequence[Tuple[Optional[float], Optional[float]]]] = None
    sense: str = MINIMIZE

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        nvar = self.objective.shape[0]
        for mat, rhs, name in ((self.A_eq, self.b_eq, "equality"), (self.A_in, self.b_in, "inequality")):
            if (mat is None) != (rhs is None):
                raise ValueError(f"{name} matrix and rhs must be given together")
            if mat is not None and (mat.shape[1] != nvar or mat.shape[0] != len(rhs)):
                raise ValueError(f"{name} block has shape {mat.shape}, rhs {len(rhs)}, variables {nvar}")
        if self.A_in is not None:
            senses = list(self.in_senses) if self.in_senses is not None else ["<="] * self.A_in.shape[0]
            if len(senses) != self.A_in.shape[0] or any(s not in ("<=", ">=") for s in senses):
                raise ValueError("one '<=' or '>=' sense per inequality row required")
            self.in_senses = senses
        if self.bounds is not None and len(self.bounds) != nvar:
            raise ValueError(f"{len(self.bounds)} bounds for {nvar} variables")
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ValueError(f"unknown sense '{self.sense}'")

    @property
    def num_variables(self) -> int:
        return self.objective.shape[0]

    # ---- serialization ----

    def to_dict(self) -> Dict[str, Any]:
        def triplets(mat) -> Optional[Dict[str, Any]]:
            if mat is None:
                return None
            coo = sp.coo_matrix(mat)
            return {"shape": list(coo.shape),
                    "entries": [[int(r), int(c), float(v)] for r, c, v in zip(coo.row, coo.col, coo.data)]}

        def vector(v) -> Optional[List[float]]:
            return None if v is None else [float(x) for x in np.asarray(v, dtype=float)]

        return {
            "kind": "lp",
            "objective": vector(self.objective),
            "A_eq": triplets(self.A_eq),
            "b_eq": vector(self.b_eq),
            "A_in": triplets(self.A_in),
            "b_in": vector(self.b_in),
            "in_senses": None if self.in_senses is None else list(self.in_senses),
            "bounds": None if self.bounds is None else [[lo, hi] for lo, hi in self.bounds],
            "sense": self.sense,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LinearProgram":
        def matrix(block: Optional[Dict[str, Any]]) -> Optional[sp.csr_matrix]:
            if block is None:
                return None
            rows, cols, vals = zip(*block["entries"]) if block["entries"] else ((), (), ())
            return sp.csr_matrix((vals, (rows, cols)), shape=tuple(block["shape"]))

        def vector(v) -> Optional[np.ndarray]:
            return None if v is None else np.array(v, dtype=float)

        bounds = data.get("bounds")
        return cls(
            objective=vector(data["objective"]),
            A_eq=matrix(data.get("A_eq")),
            b_eq=vector(data.get("b_eq")),
            A_in=matrix(data.get("A_in")),
            b_in=vector(data.get("b_in")),
            in_senses=data.get("in_senses"),
            bounds=None if bounds is None else [(lo, hi) for lo, hi in bounds],
            sense=data["sense"],
        )


_LINPROG_STATUS = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}


def solve_lp(p: LinearProgram) -> SolveReport:
    """HiGHS through scipy.optimize.linprog; maximization handled by negation."""
    flip = -1.0 if p.sense == MAXIMIZE else 1.0
    A_ub = b_ub = None
    if p.A_in is not None:
        signs = np.array([1.0 if s == "<=" else -1.0 for s in p.in_senses])
        A_ub = sp.csr_matrix(p.A_in).multiply(signs[:, None]).tocsr()
        b_ub = np.asarray(p.b_in, dtype=float) * signs
    A_eq = sp.csr_matrix(p.A_eq) if p.A_eq is not None else None
    b_eq = np.asarray(p.b_eq, dtype=float) if p.b_eq is not None else None
    bounds = p.bounds if p.bounds is not None else (0, None)

    options = {
        "primal_feasibility_tolerance": LP_CONFIG["primal_feasibility_tol"],
        "dual_feasibility_tolerance": LP_CONFIG["dual_feasibility_tol"],
    }
    start = time.perf_counter()
    try:
        res = linprog(flip * p.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method=LP_CONFIG["method"], options=options)
    except ValueError as e:
        logger.error(f"❌ linprog rejected the program: {e}")
        return SolveReport(NUMERICAL_FAILURE, None, diagnostics=str(e), tolerances=options)
    elapsed = time.perf_counter() - start

    status = _LINPROG_STATUS.get(res.status, NUMERICAL_FAILURE)
    if status != OPTIMAL:
        return SolveReport(status, None, diagnostics=res.message, tolerances=options, elapsed=elapsed)
    dual = {}
    if getattr(res, "eqlin", None) is not None and A_eq is not None:
        dual["eq"] = flip * np.asarray(res.eqlin.marginals)
    if getattr(res, "ineqlin", None) is not None and A_ub is not None:
        dual["in"] = flip * np.asarray(res.ineqlin.marginals) * signs
    return SolveReport(OPTIMAL, flip * float(res.fun), primal=np.asarray(res.x), dual=dual,
                       tolerances=options, diagnostics=res.message, elapsed=elapsed)


# ============ SEMIDEFINITE PROGRAMS ============

@dataclass
class SemidefiniteProgram:
    """Solver-neutral SDP over named real symmetric blocks and a scalar vector."""
    blocks: Dict[str, int] = field(default_factory=dict)
    psd: Dict[str, bool] = field(default_factory=dict)
    n_scalars: int = 0
    objective: Dict[Entry, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    equalities: List[Tuple[Dict[Entry, float], float]] = field(default_factory=list)
    sense: str = MAXIMIZE

    # ---- building ----

    def add_block(self, name: str, size: int, psd: bool = True) -> str:
        if name in self.blocks or name == SCALARS:
            raise ValueError(f"block '{name}' already declared")
        self.blocks[name] = size
        self.psd[name] = psd
        return name

    def add_scalars(self, count: int) -> List[Entry]:
        start = self.n_scalars
        self.n_scalars += count
        return [(SCALARS, i, 0) for i in range(start, start + count)]

    def add_hermitian_block(self, name: str, d: int) -> str:
        """2d x 2d real block constrained to the embedding of a d x d Hermitian matrix."""
        self.add_block(name, 2 * d)
        for i in range(d):
            for j in range(i, d):
                self.add_equality({(name, i, j): 1.0, (name, d + i, d + j): -1.0}, 0.0)
                # Im part antisymmetric: Y[d+i, j] = -Y[d+j, i]
                coeffs = {(name, d + i, j): 1.0}
                coeffs[(name, d + j, i)] = coeffs.get((name, d + j, i), 0.0) + 1.0
                self.add_equality(coeffs, 0.0)
        return name

    def add_equality(self, coeffs: Dict[Entry, float], rhs: float) -> None:
        coeffs = {key: value for key, value in coeffs.items() if value != 0.0}
        if not coeffs:
            if abs(rhs) > TOLERANCES["psd_eigenvalue"]:
                raise ValueError(f"empty constraint with nonzero rhs {rhs}")
            return
        self.equalities.append((coeffs, float(rhs)))

    def add_objective(self, coeffs: Dict[Entry, float], constant: float = 0.0) -> None:
        for key, value in coeffs.items():
            self.objective[key] = self.objective.get(key, 0.0) + value
        self.objective_constant += constant

    def add_trace_objective(self, name: str, C: np.ndarray, scale: float = 1.0) -> None:
        """Adds scale * tr(C X_name) for symmetric C."""
        size = self.blocks[name]
        self.add_objective({(name, i, j): scale * C[i, j] for i in range(size) for j in range(size) if C[i, j] != 0.0})

    def validate(self) -> None:
        def check(key: Entry) -> None:
            name, i, j = key
            if name == SCALARS:
                if not 0 <= i < self.n_scalars or j != 0:
                    raise ValueError(f"scalar entry {key} out of range")
                return
            if name not in self.blocks:
                raise ValueError(f"entry {key} references undeclared block")
            if not (0 <= i < self.blocks[name] and 0 <= j < self.blocks[name]):
                raise ValueError(f"entry {key} out of range for block of size {self.blocks[name]}")

        for key in self.objective:
            check(key)
        for coeffs, _ in self.equalities:
            for key in coeffs:
                check(key)
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ValueError(f"unknown sense '{self.sense}'")

    # ---- serialization ----

    def to_dict(self) -> Dict[str, Any]:
        def entries(coeffs: Dict[Entry, float]) -> List[List[Any]]:
            return [[name, i, j, value] for (name, i, j), value in coeffs.items()]

        return {
            "kind": "sdp",
            "blocks": dict(self.blocks),
            "psd": dict(self.psd),
            "n_scalars": self.n_scalars,
            "objective": entries(self.objective),
            "objective_constant": self.objective_constant,
            "equalities": [{"coeffs": entries(c), "rhs": rhs} for c, rhs in self.equalities],
            "sense": self.sense,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SemidefiniteProgram":
        def entries(rows: Iterable[List[Any]]) -> Dict[Entry, float]:
            return {(name, int(i), int(j)): float(value) for name, i, j, value in rows}

        return cls(
            blocks={k: int(v) for k, v in data["blocks"].items()},
            psd={k: bool(v) for k, v in data["psd"].items()},
            n_scalars=int(data["n_scalars"]),
            objective=entries(data["objective"]),
            objective_constant=float(data["objective_constant"]),
            equalities=[(entries(row["coeffs"]), float(row["rhs"])) for row in data["equalities"]],
            sense=data["sense"],
        )


def _vec_index(size: int, i: int, j: int) -> int:
    """Column-major position of X[i, j]; blocks are symmetric so either triangle works."""
    return i + j * size


def _coefficient_rows(
    program: SemidefiniteProgram,
    rows: List[Dict[Entry, float]],
) -> Dict[str, sp.csr_matrix]:
    """Split coefficient rows into one sparse matrix per block (plus scalars)."""
    triplets: Dict[str, Tuple[List[int], List[int], List[float]]] = {}
    for r, coeffs in enumerate(rows):
        for (name, i, j), value in coeffs.items():
            col = i if name == SCALARS else _vec_index(program.blocks[name], i, j)
            data = triplets.setdefault(name, ([], [], []))
            data[0].append(r)
            data[1].append(col)
            data[2].append(value)
    matrices = {}
    for name, (r_idx, c_idx, vals) in triplets.items():
        width = program.n_scalars if name == SCALARS else program.blocks[name] ** 2
        matrices[name] = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(len(rows), width))
    return matrices


def _solve_with(problem: cp.Problem, solver: str) -> None:
    if solver == "CLARABEL":
        problem.solve(
            solver=cp.CLARABEL,
            tol_feas=SDP_CONFIG["feasibility_tol"],
            tol_gap_rel=SDP_CONFIG["relative_gap"],
            tol_gap_abs=SDP_CONFIG["absolute_gap"],
        )
    elif solver == "SCS":
        problem.solve(solver=cp.SCS, eps=SDP_CONFIG["scs_eps"], max_iters=SDP_CONFIG["scs_max_iters"])
    else:
        problem.solve(solver=solver)


def solve_sdp(p: SemidefiniteProgram, solver: Optional[str] = None) -> SolveReport:
    """Solve the canonical SDP with cvxpy; primal blocks come back as numpy arrays."""
    p.validate()
    variables = {name: cp.Variable((size, size), symmetric=True, name=name) for name, size in p.blocks.items()}
    scalars = cp.Variable(p.n_scalars, name="scalars") if p.n_scalars else None

    def flat(name: str):
        if name == SCALARS:
            return scalars
        size = p.blocks[name]
        return cp.reshape(variables[name], (size * size,), order="F")

    constraints = [variables[name] >> 0 for name in p.blocks if p.psd.get(name, True)]
    if p.equalities:
        matrices = _coefficient_rows(p, [coeffs for coeffs, _ in p.equalities])
        lhs = sum(cp.Constant(mat) @ flat(name) for name, mat in matrices.items())
        rhs = np.array([rhs for _, rhs in p.equalities])
        constraints.append(lhs == rhs)

    objective_expr = cp.Constant(p.objective_constant)
    if p.objective:
        row = _coefficient_rows(p, [p.objective])
        objective_expr = objective_expr + sum(cp.Constant(mat) @ flat(name) for name, mat in row.items())[0]
    goal = cp.Maximize(objective_expr) if p.sense == MAXIMIZE else cp.Minimize(objective_expr)
    problem = cp.Problem(goal, constraints)

    tolerances = {"feasibility": SDP_CONFIG["feasibility_tol"], "relative_gap": SDP_CONFIG["relative_gap"]}
    chosen = solver or SDP_CONFIG["solver"]
    start = time.perf_counter()
    status = NUMERICAL_FAILURE
    diagnostics = ""
    for attempt in (chosen, SDP_CONFIG["fallback_solver"]):
        try:
            _solve_with(problem, attempt)
        except cp.error.SolverError as e:
            diagnostics = f"{attempt}: {e}"
            logger.warning(f"⚠️ {attempt} failed, trying fallback: {e}")
            continue
        status = _status_of(problem.status)
        diagnostics = f"{attempt}: {problem.status}"
        if problem.status == cp.OPTIMAL_INACCURATE:
            logger.warning(f"⚠️ {attempt} returned an inaccurate optimum")
        if status != NUMERICAL_FAILURE:
            break
        if attempt == SDP_CONFIG["fallback_solver"]:
            break
    elapsed = time.perf_counter() - start

    if status != OPTIMAL:
        return SolveReport(status, None, tolerances=tolerances, diagnostics=diagnostics, elapsed=elapsed)
    primal = {name: np.asarray(var.value) for name, var in variables.items()}
    if scalars is not None:
        primal[SCALARS] = np.asarray(scalars.value)
    return SolveReport(OPTIMAL, float(problem.value), primal=primal, tolerances=tolerances,
                       diagnostics=diagnostics, elapsed=elapsed)


def _status_of(status: str) -> str:
    if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return OPTIMAL
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return INFEASIBLE
    if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        return UNBOUNDED
    return NUMERICAL_FAILURE


def equality_residual(p: SemidefiniteProgram, report: SolveReport) -> float:
    """Largest absolute equality violation of a solved program."""
    worst = 0.0
    for coeffs, rhs in p.equalities:
        lhs = 0.0
        for (name, i, j), value in coeffs.items():
            lhs += value * (report.primal[name][i] if name == SCALARS else report.primal[name][i, j])
        worst = max(worst, abs(lhs - rhs))
    return worst


# ============ DUMPS ============

def program_to_dict(program) -> Dict[str, Any]:
    """Canonical-form dump of an LP or SDP for solver-independent replay."""
    if not isinstance(program, (LinearProgram, SemidefiniteProgram)):
        raise TypeError(f"cannot dump {type(program).__name__}")
    return program.to_dict()


def program_from_dict(data: Dict[str, Any]):
    kind = data.get("kind")
    if kind == "lp":
        return LinearProgram.from_dict(data)
    if kind == "sdp":
        return SemidefiniteProgram.from_dict(data)
    raise ValueError(f"unknown program kind {kind!r}")


# ============ REAL EMBEDDING ============

def hermitian_embed(H: np.ndarray, tol: float = TOLERANCES["hermitian"]) -> np.ndarray:
    """[[Re H, -Im H], [Im H, Re H]]; spectrum of H with doubled multiplicity."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NonHermitianError(f"expected a square matrix, got shape {H.shape}")
    if np.max(np.abs(H - H.conj().T)) > tol:
        raise NonHermitianError("matrix is not Hermitian")
    H = (H + H.conj().T) / 2
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def hermitian_unembed(Y: np.ndarray) -> np.ndarray:
    """Inverse of hermitian_embed (reads the left block column)."""
    d = Y.shape[0] // 2
    return Y[:d, :d] + 1j * Y[d:, :d]


def re_entry(name: str, d: int, i: int, j: int) -> Entry:
    """Entry holding Re H[i, j] inside an embedded block."""
    return (name, i, j)


def im_entry(name: str, d: int, i: int, j: int) -> Entry:
    """Entry holding Im H[i, j] inside an embedded block."""
    return (name, d + i, j)


def add_hermitian_combination(
    program: SemidefiniteProgram,
    terms: List[Tuple[str, float]],
    d: int,
    rhs: Optional[np.ndarray] = None,
    skip_entries: Iterable[Tuple[int, int]] = (),
) -> None:
    """
    sum_t c_t H_t == rhs over the independent entries of d x d Hermitian blocks
    (Re on and above the diagonal, Im strictly above). Positions (i, j) with
    i <= j listed in skip_entries are left out, for entries implied elsewhere.
    """
    rhs = np.zeros((d, d), dtype=complex) if rhs is None else np.asarray(rhs, dtype=complex)
    skip = set(skip_entries)
    for i in range(d):
        for j in range(i, d):
            if (i, j) in skip:
                continue
            re: Dict[Entry, float] = {}
            for name, c in terms:
                key = re_entry(name, d, i, j)
                re[key] = re.get(key, 0.0) + c
            program.add_equality(re, rhs[i, j].real)
            if i < j:
                im: Dict[Entry, float] = {}
                for name, c in terms:
                    key = im_entry(name, d, i, j)
                    im[key] = im.get(key, 0.0) + c
                program.add_equality(im, rhs[i, j].imag)
