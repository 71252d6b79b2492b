"""
Reference Cases
===============
Known strategies and equivalence sets used as fixtures and reproduction inputs:
- the qubit trine strategy for T_{3,1} (every row succeeds with 1/2 (1 + sqrt(3)/2))
- optimal one-bit classical tables for T_{3,1}, T_{4,1}, T_{4,2}
- the preparation equivalences of the contextual T_{4,1} and T_{4,2} games

Tables are written with 1-based positions as they are usually printed and
converted to 0-based labels here.
"""

from typing import Dict, List, Tuple

import numpy as np

from classical_opt import ClassicalStrategy
from game_core import (
    PREPARATION,
    OperationalEquivalence,
    QuantumModel,
    TaskSpec,
    parse_bitstring,
)

SQRT3 = np.sqrt(3.0)


def trine_qubit_model() -> QuantumModel:
    """T_{3,1} qubit strategy; state i pairs with a = (i,), POVM j with b = (j,)."""
    task = TaskSpec(3, 1)
    states = {
        (0,): np.array([[1.0, 0.0], [0.0, 0.0]]),
        (1,): 0.25 * np.array([[1.0, SQRT3], [SQRT3, 3.0]]),
        (2,): 0.25 * np.array([[1.0, -SQRT3], [-SQRT3, 3.0]]),
    }
    h = SQRT3 / 2
    povms = {
        (0,): (
            0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]]),
            0.5 * np.array([[1.0, 1.0], [1.0, 1.0]]),
        ),
        (1,): (
            0.5 * np.array([[1 - h, -0.5], [-0.5, 1 + h]]),
            0.5 * np.array([[1 + h, 0.5], [0.5, 1 - h]]),
        ),
        (2,): (
            0.5 * np.array([[1 - h, 0.5], [0.5, 1 + h]]),
            0.5 * np.array([[1 + h, -0.5], [-0.5, 1 - h]]),
        ),
    }
    return QuantumModel(task, 2, states, povms)


def _table_strategy(
    task: TaskSpec,
    encoding: Dict[str, int],
    decoding: Dict[str, Tuple[int, int]],
) -> ClassicalStrategy:
    """
    Build a one-bit strategy from bit-string keyed tables.
    decoding values are 1-based guesses per message; 0 marks an unused cell,
    filled with the smallest outcome.
    """
    enc = {parse_bitstring(bits): r for bits, r in encoding.items()}
    dec = {}
    for bits, guesses in decoding.items():
        b = parse_bitstring(bits)
        for message, guess in enumerate(guesses):
            dec[(b, message)] = guess - 1 if guess else task.outcomes(b)[0]
    return ClassicalStrategy(task, 1, enc, dec)


def optimal_t31_bit_strategy() -> ClassicalStrategy:
    """5 of 6 rows correct."""
    return _table_strategy(
        TaskSpec(3, 1),
        {"100": 1, "010": 1, "001": 0},
        {"100": (2, 3), "010": (1, 3), "001": (0, 1)},
    )


def optimal_t41_bit_strategy() -> ClassicalStrategy:
    """10 of 12 rows correct."""
    return _table_strategy(
        TaskSpec(4, 1),
        {"1000": 0, "0100": 0, "0010": 1, "0001": 1},
        {
            "1100": (0, 3),
            "1010": (4, 2),
            "1001": (3, 2),
            "0110": (4, 1),
            "0101": (3, 1),
            "0011": (1, 0),
        },
    )


def optimal_t42_bit_strategy() -> ClassicalStrategy:
    """8 of 12 rows correct."""
    return _table_strategy(
        TaskSpec(4, 2),
        {"1100": 0, "1010": 1, "1001": 1, "0110": 1, "0101": 1, "0011": 0},
        {
            "1000": (2, 3),
            "0100": (1, 3),
            "0010": (4, 1),
            "0001": (3, 1),
        },
    )


def contextual_t41_equivalences() -> List[OperationalEquivalence]:
    """rho_1 + rho_2 ~ rho_3 + rho_4."""
    return [OperationalEquivalence(PREPARATION, {(0,): 0.5, (1,): 0.5}, {(2,): 0.5, (3,): 0.5})]


def contextual_t42_equivalences() -> List[OperationalEquivalence]:
    """rho_12 + rho_13 ~ rho_14 + rho_23 ~ rho_24 + rho_34."""
    return [
        OperationalEquivalence(PREPARATION, {(0, 1): 0.5, (0, 2): 0.5}, {(0, 3): 0.5, (1, 2): 0.5}),
        OperationalEquivalence(PREPARATION, {(0, 3): 0.5, (1, 2): 0.5}, {(1, 3): 0.5, (2, 3): 0.5}),
    ]


def orthogonal_t42_model(d: int = 4) -> QuantumModel:
    """
    Perfect T_{4,2} strategy for d >= 3: complementary pairs share a basis vector,
    so the three preparations compatible with each measurement are orthogonal.
    """
    task = TaskSpec(4, 2)
    if d < 3:
        raise ValueError("perfect T_{4,2} strategy needs d >= 3")
    basis = np.eye(d)
    pair_class = {(0, 1): 0, (2, 3): 0, (0, 2): 1, (1, 3): 1, (0, 3): 2, (1, 2): 2}
    states = {a: np.outer(basis[c], basis[c]) for a, c in pair_class.items()}
    povms = {}
    for b in task.measurements:
        j = b[0]
        effects = [np.outer(basis[pair_class[tuple(sorted((j, k)))]], basis[pair_class[tuple(sorted((j, k)))]])
                   for k in task.outcomes(b)]
        # leftover dimensions go to the first outcome
        effects[0] = effects[0] + np.eye(d) - sum(effects)
        povms[b] = tuple(effects)
    return QuantumModel(task, d, states, povms)
