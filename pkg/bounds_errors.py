"""
Error taxonomy shared by every module.
Each error subclasses the closest builtin so callers may catch either.
"""

from typing import Optional


class TaskConstraintError(ValueError):
    """Invalid task parameters or a label that does not belong to the task."""


class ModelValidationError(ValueError):
    """A state, effect, behavior or equivalence breaks its invariants."""


class MissingLabelError(LookupError):
    """A metric or matrix references a label the behavior does not define."""


class NonHermitianError(ValueError):
    """Input to the real embedding is not Hermitian."""


class MetricShapeError(ValueError):
    """The metric does not have the shape a bound requires."""


class ConfigError(ValueError):
    """An experiment configuration references something that does not resolve."""


class SearchBudgetError(RuntimeError):
    """An exhaustive enumeration would exceed its configured budget."""

    def __init__(self, what: str, attempted: int, budget: int):
        self.what = what
        self.attempted = attempted
        self.budget = budget
        super().__init__(f"{what}: {attempted} exceeds budget {budget}")


class SolverFailure(RuntimeError):
    """LP/SDP backend did not return an optimal solution."""

    def __init__(self, status: str, diagnostics: str = "", restart: Optional[int] = None):
        self.status = status
        self.diagnostics = diagnostics
        self.restart = restart
        where = f" (restart {restart})" if restart is not None else ""
        super().__init__(f"solver status '{status}'{where}: {diagnostics}")


class ConstraintInfeasibleError(RuntimeError):
    """Declared equivalence constraints admit no solution."""


class CertificateError(RuntimeError):
    """The certificate LP returned an inequality that does not separate the behavior."""

    def __init__(self, bound: float, achieved: float):
        self.bound = bound
        self.achieved = achieved
        super().__init__(f"inequality reaches {achieved:.3e} against bound {bound:.3e}")
