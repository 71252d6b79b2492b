"""
Classical Strategy Search
=========================
Exhaustive search over deterministic c-bit classical strategies.

Key design principles:
1. Only encodings r(a) are enumerated (lexicographic order, 2^(c*|A|) of them)
2. For a fixed encoding the decoding separates into (b, message) cells;
   each cell takes its majority answer, ties to the smallest outcome
3. Strict improvement keeps the lexicographically smallest optimal encoding
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Dict, List, Optional, Tuple

import pandas as pd
from tqdm import tqdm

from bounds_config import SEARCH_BUDGETS
from bounds_errors import SearchBudgetError, TaskConstraintError
from game_core import Behavior, Label, TaskSpec, bitstring

logger = logging.getLogger("classical_opt")


@dataclass(frozen=True)
class ClassicalStrategy:
    """Encoding r(a) in 0..2^c-1 and decoding g(b, r) in outcomes(b)."""
    task: TaskSpec
    message_bits: int
    encoding: Dict[Label, int]
    decoding: Dict[Tuple[Label, int], int]

    def __post_init__(self):
        task = self.task
        if self.message_bits < 1:
            raise TaskConstraintError(f"message_bits must be >= 1, got {self.message_bits}")
        messages = 2 ** self.message_bits
        encoding = {task.check_preparation(a): int(r) for a, r in dict(self.encoding).items()}
        if set(encoding) != set(task.preparations):
            raise TaskConstraintError("encoding must cover every preparation")
        if any(not 0 <= r < messages for r in encoding.values()):
            raise TaskConstraintError(f"messages must lie in 0..{messages - 1}")
        decoding = {}
        for (b, r), guess in dict(self.decoding).items():
            b = task.check_measurement(b)
            if int(guess) not in task.outcomes(b):
                raise TaskConstraintError(f"g({b}, {r}) = {guess} is not an outcome of {b}")
            decoding[(b, int(r))] = int(guess)
        for b in task.measurements:
            for r in range(messages):
                decoding.setdefault((b, r), task.outcomes(b)[0])
        object.__setattr__(self, "encoding", encoding)
        object.__setattr__(self, "decoding", decoding)

    def guess(self, a: Label, b: Label) -> int:
        return self.decoding[(b, self.encoding[a])]

    def correct_count(self) -> int:
        return sum(1 for row in self.task.scenarios if self.guess(row.a, row.b) == row.s)


def _cell_rows(task: TaskSpec) -> Dict[Label, List[Tuple[int, int]]]:
    """Per measurement: (preparation index, s) for every scenario row."""
    cells: Dict[Label, List[Tuple[int, int]]] = {b: [] for b in task.measurements}
    for row in task.scenarios:
        cells[row.b].append((task.prep_index[row.a], row.s))
    return cells


def _best_decoding(
    task: TaskSpec,
    cells: Dict[Label, List[Tuple[int, int]]],
    encoding: Tuple[int, ...],
    messages: int,
) -> Tuple[int, Dict[Tuple[Label, int], int]]:
    """Majority decoding for a fixed encoding; returns (correct rows, decoding)."""
    correct = 0
    decoding = {}
    for b, rows in cells.items():
        outs = task.outcomes(b)
        for r in range(messages):
            tally = {k: 0 for k in outs}
            for prep, s in rows:
                if encoding[prep] == r:
                    tally[s] += 1
            # max() keeps the first maximal key, outs is ascending
            best = max(outs, key=lambda k: tally[k])
            decoding[(b, r)] = best
            correct += tally[best]
    return correct, decoding


def optimal_classical(
    task: TaskSpec,
    message_bits: int,
    budget: Optional[int] = None,
) -> Tuple[int, ClassicalStrategy]:
    """Exact maximum number of correct rows over deterministic c-bit strategies."""
    if message_bits < 1:
        raise TaskConstraintError(f"message_bits must be >= 1, got {message_bits}")
    budget = SEARCH_BUDGETS["classical_encodings"] if budget is None else budget
    messages = 2 ** message_bits
    preps = len(task.preparations)
    attempted = messages ** preps
    if attempted > budget:
        raise SearchBudgetError(f"classical search over {task.name} with {message_bits} bits", attempted, budget)

    cells = _cell_rows(task)
    best_count = -1
    best: Tuple[Tuple[int, ...], Dict] = ((), {})
    show_bar = attempted > SEARCH_BUDGETS["progress_threshold"]
    for encoding in tqdm(product(range(messages), repeat=preps), total=attempted,
                         desc=f"Encodings {task.name}", disable=not show_bar):
        count, decoding = _best_decoding(task, cells, encoding, messages)
        if count > best_count:
            best_count, best = count, (encoding, decoding)
            if best_count == task.row_count:
                break

    encoding, decoding = best
    strategy = ClassicalStrategy(task, message_bits, dict(zip(task.preparations, encoding)), decoding)
    logger.info(f"✅ {task.name} with {message_bits} bit(s): {best_count}/{task.row_count} rows")
    return best_count, strategy


def strategy_behavior(task: TaskSpec, strategy: ClassicalStrategy) -> Behavior:
    """Deterministic behavior p(k|a,b) = 1 iff k = g(b, r(a))."""
    probs = {}
    for a in task.preparations:
        for b in task.measurements:
            guess = strategy.guess(a, b)
            for k in task.outcomes(b):
                probs[(a, b, k)] = 1.0 if k == guess else 0.0
    return Behavior(task, probs)


def worst_case_success(task: TaskSpec, strategy: ClassicalStrategy) -> Fraction:
    """Minimum over rows of the 0/1 correctness indicator."""
    return min(Fraction(int(strategy.guess(row.a, row.b) == row.s)) for row in task.scenarios)


# ============ TABLE RENDERING ============

def render_strategy_tables(task: TaskSpec, strategy: ClassicalStrategy) -> str:
    """Encoding, decoding and scenario tables; wrong guesses marked with '*'."""
    n = task.n
    encoding = pd.DataFrame(
        [{"a": bitstring(a, n), "r(a)": strategy.encoding[a]} for a in task.preparations]
    )
    messages = 2 ** strategy.message_bits
    decoding = pd.DataFrame(
        [
            {"b": bitstring(b, n), **{f"g(b,{r})": strategy.decoding[(b, r)] + 1 for r in range(messages)}}
            for b in task.measurements
        ]
    )
    scenario_rows = []
    for row in task.scenarios:
        guess = strategy.guess(row.a, row.b)
        mark = "" if guess == row.s else "*"
        scenario_rows.append({
            "s": bitstring((row.s,), n),
            "a": bitstring(row.a, n),
            "b": bitstring(row.b, n),
            "r(a)": strategy.encoding[row.a],
            "g(b,r(a))": f"{guess + 1}{mark}",
        })
    scenarios = pd.DataFrame(scenario_rows)
    return "\n\n".join(frame.to_string(index=False) for frame in (encoding, decoding, scenarios))


def render_general_strategy(task: TaskSpec) -> str:
    """Symbolic scenario table (s, a, b, r(a), g(b, r(a))) for any task."""
    n = task.n
    frame = pd.DataFrame(
        [
            {
                "s": bitstring((row.s,), n),
                "a": bitstring(row.a, n),
                "b": bitstring(row.b, n),
                "r(a)": f"r({bitstring(row.a, n)})",
                "g(b,r(a))": f"g({bitstring(row.b, n)},r({bitstring(row.a, n)}))",
            }
            for row in task.scenarios
        ]
    )
    return frame.to_string(index=False)
