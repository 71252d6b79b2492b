"""
Bounds Toolkit Configuration
============================
Externalized configuration for the bounds toolkit.
All tolerances, solver settings and search budgets in one place.

Design decisions for the open questions:
1. Metric: uniform average over scenario rows (weight 1 per row), worst case tracked separately
2. See-saw: epsilon 1e-9, 200 rounds, 20 restarts (our calibration, tunable below)
3. Farkas normalization: constant rows sum to 1 inside a coefficient box, plain box fallback
4. T_{4,2} level-1 hierarchy value: recorded in reports, never asserted
5. Worst-case quantum success: reported per model, no optimality claim
"""

import os
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()

# ============ VERSION ============
TOOLKIT_VERSION = "0.3.0"

# ============ TOLERANCES ============
TOLERANCES: Dict[str, float] = {
    "psd_eigenvalue": 1e-8,         # states and effects
    "hermitian": 1e-8,              # symmetrization deviation allowed on construction
    "povm_identity": 1e-8,          # entrywise sum-to-identity
    "normalization": 1e-9,          # behavior rows sum to 1
    "probability_range": 1e-9,      # entries in [0, 1]
    "convex_weight": 1e-12,         # equivalence sides sum to 1
    "imaginary_residue": 1e-10,     # tr(rho E) imaginary part
    "equivalence_check": 1e-6,
    "frame_norm": 1e-10,
    "pure_state_warning": 1e-4,     # dominant eigenvalue below 1 - tol is flagged
    "witness": 1e-9,
    "comm_row_sum": 1e-9,
    "comm_negativity": 1e-10,
    "monotonicity": 1e-7,
    "nc_slack": 1e-7,               # L1 slack below this counts as noncontextual
    "equiangular": 1e-3,            # spread of pairwise overlaps for see-saw frames
}

# ============ SDP CONFIG ============
SDP_CONFIG: Dict[str, Any] = {
    "solver": os.getenv("PICB_SDP_SOLVER", "CLARABEL"),
    "fallback_solver": "SCS",
    "feasibility_tol": 1e-8,
    "relative_gap": 1e-8,
    "absolute_gap": 1e-8,
    "scs_eps": 1e-9,
    "scs_max_iters": 200_000,
}

# ============ LP CONFIG ============
LP_CONFIG: Dict[str, Any] = {
    "method": "highs",
    "primal_feasibility_tol": 1e-9,
    "dual_feasibility_tol": 1e-9,
    "farkas_box": 100.0,            # |y| bound in the certificate LP
}

# ============ SEARCH BUDGETS ============
# Hard guards, exceeded -> SearchBudgetError
SEARCH_BUDGETS: Dict[str, int] = {
    "classical_encodings": int(os.getenv("PICB_CLASSICAL_BUDGET", 2**24)),
    "vertices": int(os.getenv("PICB_VERTEX_BUDGET", 10**6)),
    "progress_threshold": 4096,     # loops longer than this get a tqdm bar
}

# ============ SEE-SAW DEFAULTS ============
SEESAW_DEFAULTS: Dict[str, Any] = {
    "epsilon": 1e-9,
    "max_rounds": 200,
    "restarts": int(os.getenv("PICB_SEESAW_RESTARTS", 20)),
    "seed": 0,
    "workers": int(os.getenv("PICB_SEESAW_WORKERS", 1)),
}

# ============ REPORT CONFIG ============
REPORT_CONFIG: Dict[str, Any] = {
    "default_output": Path("report.json"),
    "float_format": "{:.8f}",
    "methods_order": ["classical", "seesaw", "outer", "contextual", "frames", "witness"],
}


def get_tolerance(name: str) -> float:
    """Get a named tolerance, rejecting unknown names."""
    if name not in TOLERANCES:
        raise KeyError(f"Unknown tolerance '{name}'")
    return TOLERANCES[name]


def get_budget(name: str) -> int:
    """Get a named search budget, rejecting unknown names."""
    if name not in SEARCH_BUDGETS:
        raise KeyError(f"Unknown budget '{name}'")
    return SEARCH_BUDGETS[name]
