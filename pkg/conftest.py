"""Shared fixtures: tasks, metrics, and see-saw runs cached for the whole session."""

from typing import Callable, Dict, Tuple

import numpy as np
import pytest

from game_core import TaskSpec, canonical_metric, signed_metric
from reference_cases import contextual_t41_equivalences, contextual_t42_equivalences
from seesaw import SeesawConfig, SeesawResult, seesaw

# See-saw settings for tests
TEST_RESTARTS = 10
TEST_EPSILON = 1e-8
TEST_MAX_ROUNDS = 150


@pytest.fixture(scope="session")
def t31() -> TaskSpec:
    return TaskSpec(3, 1)


@pytest.fixture(scope="session")
def t41() -> TaskSpec:
    return TaskSpec(4, 1)


@pytest.fixture(scope="session")
def t42() -> TaskSpec:
    return TaskSpec(4, 2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def seesaw_run() -> Callable[..., SeesawResult]:
    """
    seesaw_run(n, m, d, contextual=False).
    contextual T_{4,1} uses the signed metric with its preparation equivalences;
    contextual T_{4,2} keeps the canonical metric.
    """
    cache: Dict[Tuple[int, int, int, bool], SeesawResult] = {}

    def run(n: int, m: int, d: int, contextual: bool = False) -> SeesawResult:
        key = (n, m, d, contextual)
        if key not in cache:
            task = TaskSpec(n, m)
            metric = canonical_metric(task)
            eqs = ()
            if contextual and (n, m) == (4, 1):
                metric, eqs = signed_metric(task), tuple(contextual_t41_equivalences())
            elif contextual and (n, m) == (4, 2):
                eqs = tuple(contextual_t42_equivalences())
            elif contextual:
                raise ValueError(f"no contextual reference for T_{{{n},{m}}}")
            cfg = SeesawConfig(dimension=d, restarts=TEST_RESTARTS, epsilon=TEST_EPSILON,
                               max_rounds=TEST_MAX_ROUNDS, seed=0, prep_equivalences=eqs)
            cache[key] = seesaw(task, metric, cfg)
        return cache[key]

    return run
