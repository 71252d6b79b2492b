"""
Dimension Witness Module
========================
Communication matrices of a behavior and the lambda_max witness:
rank_psd(A) >= lambda_max(A) = sum of column maxima, so lambda_max(A) > d
rules out every d-dimensional quantum implementation.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd

from bounds_config import TOLERANCES
from bounds_errors import MetricShapeError, ModelValidationError
from game_core import Behavior, EntryKey, Label, SuccessMetric, TaskSpec, bitstring

logger = logging.getLogger("dimension_witness")

CONSISTENT = "consistent"
EXCLUDED = "excluded"


@dataclass(frozen=True)
class CommunicationMatrix:
    """Row-stochastic matrix, rows = preparations, columns = outcomes of one measurement."""
    rows: Tuple[Label, ...]
    columns: Tuple[int, ...]
    values: np.ndarray
    measurement: Optional[Label] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.rows), len(self.columns)):
            raise ModelValidationError(f"matrix shape {values.shape} does not match {len(self.rows)}x{len(self.columns)}")
        if values.size and values.min() < -TOLERANCES["comm_negativity"]:
            raise ModelValidationError(f"negative entry {values.min():.2e}")
        sums = values.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > TOLERANCES["comm_row_sum"]:
            raise ModelValidationError(f"rows are not stochastic (sums {sums})")
        values.setflags(write=False)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


def comm_matrix(behavior: Behavior, b: Sequence[int]) -> CommunicationMatrix:
    """Entry (i, k) = p(k | P_i, M_b)."""
    task = behavior.task
    b = task.check_measurement(b)
    outs = task.outcomes(b)
    values = [[behavior.p(a, b, k) for k in outs] for a in task.preparations]
    return CommunicationMatrix(tuple(task.preparations), outs, np.array(values), measurement=b)


def lambda_max(A: CommunicationMatrix) -> float:
    return float(np.sum(np.max(A.values, axis=0)))


def dimension_witness(A: CommunicationMatrix, d: int, tol: float = TOLERANCES["witness"]) -> str:
    """EXCLUDED means no d-dimensional quantum model produces A; CONSISTENT claims nothing."""
    value = lambda_max(A)
    if value > d + tol:
        logger.info(f"❌ lambda_max {value:.9f} excludes dimension {d}")
        return EXCLUDED
    return CONSISTENT


def _metric_columns(task: TaskSpec, metric: SuccessMetric) -> Dict[Label, Set[int]]:
    if metric.constant_offset != 0.0 or any(w != 1.0 for w in metric.weights.values()):
        raise MetricShapeError("lambda bound needs unit weights and no offset")
    pairs: Set[Tuple[Label, Label]] = set()
    columns: Dict[Label, Set[int]] = {b: set() for b in task.measurements}
    for a, b, k in metric.weights:
        if (a, b) in pairs:
            raise MetricShapeError(f"two metric terms on the pair ({a}, {b})")
        if k in columns[b]:
            raise MetricShapeError(f"two metric terms on the column ({b}, {k})")
        pairs.add((a, b))
        columns[b].add(k)
    return columns


def metric_bound_via_lambda(task: TaskSpec, metric: SuccessMetric, d: int) -> float:
    """
    Per measurement the metric entries sit in distinct rows and columns, so their
    sum is at most lambda_max <= d, and at most the number of columns used.
    """
    if metric.task != task:
        raise ValueError(f"metric for {metric.task.name} used with {task.name}")
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    columns = _metric_columns(task, metric)
    return float(sum(min(d, len(cols)) for cols in columns.values()))


def render_comm_matrix(
    task: TaskSpec,
    A: CommunicationMatrix,
    highlight: Sequence[EntryKey] = (),
    float_format: str = "{:.6f}",
) -> str:
    """Rows by preparation bit string, columns by 1-based outcome; highlighted entries in brackets."""
    marked = {(a, k) for a, b, k in highlight if b == A.measurement}
    frame = pd.DataFrame(
        [
            {
                "a": bitstring(a, task.n),
                **{
                    str(k + 1): (f"[{float_format.format(v)}]" if (a, k) in marked else float_format.format(v))
                    for k, v in zip(A.columns, row)
                },
            }
            for a, row in zip(A.rows, A.values)
        ]
    )
    title = f"M = {bitstring(A.measurement, task.n)}" if A.measurement is not None else "M"
    return f"{title}   lambda_max = {lambda_max(A):.6f}\n{frame.to_string(index=False)}"
