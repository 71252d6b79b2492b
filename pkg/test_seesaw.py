import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bounds_config import TOLERANCES
from game_core import (
    TaskSpec,
    behavior_of,
    canonical_metric,
    check_equivalence,
    evaluate_metric,
    haar_pure_state,
    random_povm,
)
from frames import helstrom_value
from reference_cases import contextual_t41_equivalences, contextual_t42_equivalences, trine_qubit_model
from seesaw import SeesawConfig, measurement_step, model_value, seesaw, state_step

SQRT2 = math.sqrt(2.0)


# ============ REFERENCE VALUES ============

@pytest.mark.parametrize(
    "d,expected",
    [(2, 6 * (1 + math.sqrt(2 / 3))), (3, 6 * (1 + 2 * SQRT2 / 3)), (4, 12.0)],
)
def test_t41_values(seesaw_run, d, expected):
    result = seesaw_run(4, 1, d)
    assert_allclose(result.best_value, expected, atol=1e-5)


@pytest.mark.parametrize("d,expected", [(2, 8.0), (3, 12.0)])
def test_t42_values(seesaw_run, d, expected):
    assert_allclose(seesaw_run(4, 2, d).best_value, expected, atol=1e-5)


def test_t31_qubit_reaches_trine_value(seesaw_run):
    assert_allclose(seesaw_run(3, 1, 2).best_value, 3 * (1 + math.sqrt(3) / 2), atol=1e-5)


def test_contextual_t41_value_and_equivalence(seesaw_run, t41):
    result = seesaw_run(4, 1, 2, contextual=True)
    assert_allclose(result.best_value, 2 + 2 * SQRT2, atol=1e-5)
    for eq in contextual_t41_equivalences():
        assert check_equivalence(result.model, eq, tol=1e-6)


@pytest.mark.parametrize("d", [2, 3])
def test_contextual_t42_value(seesaw_run, d):
    result = seesaw_run(4, 2, d, contextual=True)
    assert_allclose(result.best_value, 8.0, atol=1e-5)
    for eq in contextual_t42_equivalences():
        assert check_equivalence(result.model, eq, tol=1e-6)


# ============ ALGORITHM PROPERTIES ============

def test_traces_are_monotone(seesaw_run):
    result = seesaw_run(4, 1, 3)
    assert len(result.traces) == 10
    for trace in result.traces:
        steps = np.diff(trace.history)
        assert np.all(steps >= -TOLERANCES["monotonicity"])
        assert trace.value == trace.history[-1]


def test_best_value_matches_returned_model(seesaw_run, t41):
    result = seesaw_run(4, 1, 2)
    assert_allclose(evaluate_metric(canonical_metric(t41), behavior_of(result.model)), result.best_value)
    assert result.best_value >= max(t.value for t in result.traces) - 1e-7
    assert result.trace_pairs[result.best_restart][1] == result.traces[result.best_restart].value


def test_same_seed_same_result():
    task = TaskSpec(3, 1)
    cfg = SeesawConfig(dimension=2, restarts=2, max_rounds=30, seed=7)
    first = seesaw(task, canonical_metric(task), cfg)
    second = seesaw(task, canonical_metric(task), cfg)
    assert first.best_value == second.best_value
    assert [t.history for t in first.traces] == [t.history for t in second.traces]


def test_single_steps_do_not_lower_the_value(rng):
    task = TaskSpec(4, 1)
    metric = canonical_metric(task)
    states = {a: haar_pure_state(2, rng) for a in task.preparations}
    povms = {b: random_povm(2, 2, rng) for b in task.measurements}
    start = model_value(task, metric, states, povms)
    x1, povms = measurement_step(states, task, metric)
    assert x1 >= start - 1e-7
    x2, states = state_step(povms, task, metric)
    assert x2 >= x1 - 1e-7
    assert_allclose(x2, model_value(task, metric, states, povms), atol=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        SeesawConfig(dimension=0)
    with pytest.raises(ValueError):
        SeesawConfig(dimension=2, epsilon=0.0)
    with pytest.raises(ValueError):
        SeesawConfig(dimension=2, prep_equivalences=[contextual_t41_equivalences()[0]],
                     effect_equivalences=[contextual_t41_equivalences()[0]])


def test_metric_task_mismatch():
    with pytest.raises(ValueError):
        seesaw(TaskSpec(4, 1), canonical_metric(TaskSpec(3, 1)), SeesawConfig(dimension=2, restarts=1))


# ============ STEP ORACLES ============

TRINE_VALUE = 6 * 0.5 * (1 + math.sqrt(3) / 2)


def test_measurement_step_on_trine_states():
    model = trine_qubit_model()
    task = model.task
    value, povms = measurement_step(model.states, task, canonical_metric(task))
    assert_allclose(value, TRINE_VALUE, atol=1e-5)
    for b in task.measurements:
        assert_allclose(sum(povms[b]), np.eye(2), atol=1e-8)


def test_state_step_on_trine_measurements():
    model = trine_qubit_model()
    task = model.task
    value, states = state_step(model.povms, task, canonical_metric(task))
    assert_allclose(value, TRINE_VALUE, atol=1e-5)
    for a in task.preparations:
        assert_allclose(states[a], model.states[a], atol=1e-8)


def test_measurement_step_matches_helstrom(rng):
    # each T_{3,1} measurement separates the two preparations it does not reveal
    task = TaskSpec(3, 1)
    for _ in range(3):
        states = {a: haar_pure_state(2, rng) for a in task.preparations}
        expected = sum(
            2 * helstrom_value(*(states[a] for a in task.preparations if a != b))
            for b in task.measurements
        )
        value, _ = measurement_step(states, task, canonical_metric(task))
        assert_allclose(value, expected, atol=1e-5)


@pytest.mark.parametrize("n,m,d", [(4, 1, 2), (4, 2, 3)])
def test_state_step_matches_top_eigenvalues(n, m, d, rng):
    task = TaskSpec(n, m)
    metric = canonical_metric(task)
    povms = {b: random_povm(d, task.num_outcomes, rng) for b in task.measurements}
    operators = {a: np.zeros((d, d), dtype=complex) for a in task.preparations}
    for (a, b, k), w in metric.weights.items():
        operators[a] += w * povms[b][task.outcomes(b).index(k)]
    expected = sum(np.linalg.eigvalsh(op)[-1] for op in operators.values()) + metric.constant_offset
    value, _ = state_step(povms, task, metric)
    assert_allclose(value, expected, atol=1e-9)
