"""
Frames Module
=============
Unit frames, maximal frame correlation and the Welch bound, two-state
discrimination, and the closed-form T_{4,1} bounds they imply.

Pairwise view of T_{4,1}: each row asks Bob to tell apart two of Alice's
states, so the best pure-state families are equiangular and sit on the
Welch bound.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from bounds_config import TOLERANCES
from bounds_errors import ModelValidationError, NonHermitianError

logger = logging.getLogger("frames")


@dataclass(frozen=True)
class UnitFrame:
    """n unit vectors in C^d (or R^d when real), stored as the rows of an n x d array."""
    dimension: int
    vectors: np.ndarray
    real: bool = False

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=float if self.real else complex)
        if vectors.ndim != 2 or vectors.shape[1] != self.dimension:
            raise ModelValidationError(f"frame vectors have shape {vectors.shape}, dimension {self.dimension}")
        norms = np.linalg.norm(vectors, axis=1)
        if np.max(np.abs(norms - 1.0)) > TOLERANCES["frame_norm"]:
            raise ModelValidationError(f"frame vectors are not unit vectors (norms {norms})")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def overlaps(self) -> np.ndarray:
        """|<f_j, f_k>| for every pair."""
        return np.abs(self.vectors.conj() @ self.vectors.T)


def _off_diagonal(f: UnitFrame) -> np.ndarray:
    if len(f) < 2:
        raise ValueError("frame correlation needs at least 2 vectors")
    gram = f.overlaps()
    return gram[~np.eye(len(f), dtype=bool)]


def max_frame_correlation(f: UnitFrame) -> float:
    return float(np.max(_off_diagonal(f)))


def verify_equiangular(f: UnitFrame, tol: float = 1e-8) -> bool:
    values = _off_diagonal(f)
    return bool(np.max(values) - np.min(values) <= tol)


def welch_bound(n: int, d: int) -> float:
    """Lower bound on the maximal correlation of n unit vectors in dimension d."""
    if d < 1 or n < d:
        raise ValueError(f"welch bound needs n >= d >= 1, got n={n}, d={d}")
    if n == 1:
        return 0.0
    return math.sqrt((n - d) / (d * (n - 1)))


def welch_attainable(n: int, d: int, real: bool = False) -> bool:
    """Necessary size condition for an equiangular tight frame: n <= d^2 (complex), d(d+1)/2 (real)."""
    return n <= (d * (d + 1) // 2 if real else d * d)


def ambiguous_psuc(overlap: float) -> float:
    """Optimal guessing probability between two equiprobable pure states with |<phi|psi>| = overlap."""
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    return 0.5 * (1.0 + math.sqrt(1.0 - overlap * overlap))


def t41_analytic_bound(d: int) -> float:
    """12 rows, each a two-state discrimination at the Welch overlap of 4 vectors in dimension d."""
    if not 2 <= d <= 4:
        raise ValueError(f"closed form covers 2 <= d <= 4, got {d}")
    overlap = math.sqrt(max(0.0, (4 - d) / (3 * d)))
    return min(12.0, 12.0 * ambiguous_psuc(overlap))


def t31_pairwise_bound() -> float:
    """6 rows, each discriminating two trine states (overlap 1/2)."""
    return 6.0 * ambiguous_psuc(0.5)


def helstrom_value(rho: np.ndarray, sigma: np.ndarray) -> float:
    """1/2 (1 + 1/2 ||rho - sigma||_1) for equal priors."""
    delta = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
    if np.max(np.abs(delta - delta.conj().T)) > TOLERANCES["hermitian"]:
        raise NonHermitianError("states must be Hermitian")
    trace_norm = np.sum(np.abs(np.linalg.eigvalsh((delta + delta.conj().T) / 2)))
    return 0.5 * (1.0 + 0.5 * float(trace_norm))


def frame_from_states(states: Union[Dict, Sequence[np.ndarray]], tol: Optional[float] = None) -> UnitFrame:
    """Dominant eigenvector of each state; mixed optima are flagged."""
    tol = TOLERANCES["pure_state_warning"] if tol is None else tol
    matrices = list(states.values()) if isinstance(states, dict) else list(states)
    if not matrices:
        raise ValueError("no states given")
    vectors = []
    for i, rho in enumerate(matrices):
        w, v = np.linalg.eigh(np.asarray(rho, dtype=complex))
        if w[-1] < 1.0 - tol:
            logger.warning(f"⚠️ state {i} is not pure (top eigenvalue {w[-1]:.6f})")
        vectors.append(v[:, -1] / np.linalg.norm(v[:, -1]))
    return UnitFrame(np.asarray(matrices[0]).shape[0], np.array(vectors))
