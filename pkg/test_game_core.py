import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bounds_errors import MissingLabelError, ModelValidationError, TaskConstraintError
from game_core import (
    EFFECT,
    PREPARATION,
    Behavior,
    OperationalEquivalence,
    QuantumModel,
    SuccessMetric,
    TaskSpec,
    behavior_of,
    bitstring,
    canonical_metric,
    check_equivalence,
    evaluate_metric,
    format_key,
    negative_row_count,
    outcome_position,
    parse_bitstring,
    project_povm,
    project_state,
    random_behavior,
    random_model,
    signed_metric,
    signed_metric_t41,
    uniform_behavior,
    worst_scenario,
)
from reference_cases import orthogonal_t42_model, trine_qubit_model


# ============ TASKS ============

@pytest.mark.parametrize("n,m,rows", [(3, 1, 6), (4, 1, 12), (4, 2, 12), (5, 1, 20), (5, 3, 20)])
def test_row_count(n, m, rows):
    task = TaskSpec(n, m)
    assert task.row_count == rows
    assert len(task.scenarios) == rows


@pytest.mark.parametrize("n,m", [(2, 0), (3, 3), (4, 5), (1, 1), (True, 1), (4, True), (4.0, 1)])
def test_invalid_task(n, m):
    with pytest.raises(TaskConstraintError):
        TaskSpec(n, m)


def test_scenarios_partition_indices():
    for n, m in [(3, 1), (4, 1), (4, 2), (5, 2)]:
        task = TaskSpec(n, m)
        for row in task.scenarios:
            assert sorted((row.s,) + row.a + row.b) == list(range(n))
            assert len(row.a) == m
            assert row.s in task.outcomes(row.b)


def test_scenario_order_is_lexicographic_in_s_then_a():
    task = TaskSpec(4, 1)
    keys = [(row.s, row.a) for row in task.scenarios]
    assert keys == sorted(keys)
    assert task.scenarios[0].key == ((1,), (2, 3), 0)


def test_outcomes_are_complement_of_measurement():
    task = TaskSpec(4, 1)
    assert task.outcomes((1, 3)) == (0, 2)
    assert task.outcomes([3, 1]) == (0, 2)
    with pytest.raises(TaskConstraintError):
        task.outcomes((1,))


def test_binary_flag_and_message_bits():
    assert TaskSpec(4, 1).is_binary
    assert not TaskSpec(4, 2).is_binary
    assert TaskSpec(4, 2).num_outcomes == 3
    assert TaskSpec(4, 2).message_bits_for_perfect() == 3
    assert TaskSpec(3, 1).message_bits_for_perfect() == 2


# ============ METRICS ============

def test_canonical_metric_has_one_term_per_row(t41):
    metric = canonical_metric(t41)
    assert len(metric) == t41.row_count
    assert set(metric.weights.values()) == {1.0}


def test_signed_metric_t41_equals_canonical_minus_negatives(t41, rng):
    assert negative_row_count(t41) == 6
    signed_t41, canonical = signed_metric_t41(), canonical_metric(t41)
    for _ in range(1000):
        behavior = random_behavior(t41, rng)
        assert_allclose(evaluate_metric(signed_t41, behavior), evaluate_metric(canonical, behavior) - 6, atol=1e-12)


def test_signed_metric_rejects_multi_outcome(t42):
    with pytest.raises(TaskConstraintError):
        signed_metric(t42)


def test_metric_rejects_foreign_label(t41):
    with pytest.raises(TaskConstraintError):
        SuccessMetric(t41, {((0,), (1, 2), 1): 1.0})


def test_uniform_behavior_value(t42):
    assert_allclose(evaluate_metric(canonical_metric(t42), uniform_behavior(t42)), 4.0)


# ============ BEHAVIORS ============

def test_behavior_rejects_bad_rows(t41):
    a, b = (0,), (1, 2)
    with pytest.raises(ModelValidationError):
        Behavior(t41, {(a, b, 0): 0.7, (a, b, 3): 0.7})
    with pytest.raises(ModelValidationError):
        Behavior(t41, {(a, b, 0): 1.0})
    with pytest.raises(ModelValidationError):
        Behavior(t41, {(a, b, 0): 1.5, (a, b, 3): -0.5})


def test_partial_behavior_and_missing_label(t41):
    a, b = (0,), (1, 2)
    behavior = Behavior(t41, {(a, b, 0): 0.25, (a, b, 3): 0.75})
    assert behavior.defines(a, b)
    assert not behavior.defines((1,), (2, 3))
    assert not behavior.is_complete()
    with pytest.raises(MissingLabelError):
        behavior.p((1,), (2, 3), 0)
    with pytest.raises(MissingLabelError):
        evaluate_metric(canonical_metric(t41), behavior)


def test_worst_scenario(t31):
    row, value = worst_scenario(t31, behavior_of(trine_qubit_model()))
    assert_allclose(value, 0.5 * (1 + math.sqrt(3) / 2), atol=1e-9)
    assert row in t31.scenarios


# ============ QUANTUM MODELS ============

def test_trine_model_reaches_pairwise_bound(t31):
    value = evaluate_metric(canonical_metric(t31), behavior_of(trine_qubit_model()))
    assert_allclose(value, 3 * (1 + math.sqrt(3) / 2), atol=1e-9)


def test_orthogonal_t42_model_is_perfect(t42):
    value = evaluate_metric(canonical_metric(t42), behavior_of(orthogonal_t42_model(3)))
    assert_allclose(value, 12.0, atol=1e-9)


def test_model_rejects_invalid_effects(t41):
    model = random_model(t41, 2, np.random.default_rng(0))
    povms = dict(model.povms)
    b = t41.measurements[0]
    povms[b] = (np.eye(2), np.eye(2))
    with pytest.raises(ModelValidationError):
        QuantumModel(t41, 2, model.states, povms)
    states = dict(model.states)
    states[(0,)] = np.array([[1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ModelValidationError):
        QuantumModel(t41, 2, states, model.povms)


def test_model_requires_every_label(t41):
    model = random_model(t41, 2, np.random.default_rng(0))
    states = dict(model.states)
    del states[(3,)]
    with pytest.raises(ModelValidationError):
        QuantumModel(t41, 2, states, model.povms)


@pytest.mark.parametrize("d", [2, 3])
def test_random_models_give_normalized_behaviors(t42, d, rng):
    behavior = behavior_of(random_model(t42, d, rng))
    assert behavior.is_complete()
    for a in t42.preparations:
        for b in t42.measurements:
            assert_allclose(sum(behavior.p(a, b, k) for k in t42.outcomes(b)), 1.0, atol=1e-8)


def test_projections_repair_noisy_output(rng):
    rho = np.array([[0.7, 0.1], [0.1, 0.31]]) + 1e-3 * rng.normal(size=(2, 2))
    fixed = project_state(rho)
    assert_allclose(np.trace(fixed).real, 1.0, atol=1e-12)
    assert np.linalg.eigvalsh(fixed).min() >= -1e-12
    effects = project_povm([np.diag([1.01, -0.01]), np.diag([0.0, 1.02])])
    assert_allclose(sum(effects), np.eye(2), atol=1e-10)


# ============ EQUIVALENCES ============

def test_equivalence_weights_must_be_convex():
    with pytest.raises(ModelValidationError):
        OperationalEquivalence(PREPARATION, {(0,): 0.5}, {(1,): 1.0})
    with pytest.raises(ModelValidationError):
        OperationalEquivalence("mixture", {(0,): 1.0}, {(1,): 1.0})


def test_equivalence_coefficients_and_check(t41):
    eq = OperationalEquivalence(PREPARATION, {(0,): 0.5, (1,): 0.5}, {(2,): 0.5, (3,): 0.5})
    assert eq.coefficients() == {(0,): 0.5, (1,): 0.5, (2,): -0.5, (3,): -0.5}
    mixed = np.eye(2) / 2
    states = {(0,): np.diag([1.0, 0.0]), (1,): np.diag([0.0, 1.0]),
              (2,): np.array([[0.5, 0.5], [0.5, 0.5]]), (3,): np.array([[0.5, -0.5], [-0.5, 0.5]])}
    assert_allclose(0.5 * states[(2,)] + 0.5 * states[(3,)], mixed)
    povms = {b: (np.eye(2), np.zeros((2, 2))) for b in t41.measurements}
    model = QuantumModel(t41, 2, states, povms)
    assert check_equivalence(model, eq)
    skewed = OperationalEquivalence(PREPARATION, {(0,): 1.0}, {(2,): 1.0})
    assert not check_equivalence(model, skewed)


def test_effect_equivalence_validation(t31):
    eq = OperationalEquivalence(EFFECT, {((0,), 1): 1.0}, {((1,), 0): 1.0})
    assert eq.validate_for(t31) is eq
    bad = OperationalEquivalence(EFFECT, {((0,), 0): 1.0}, {((1,), 0): 1.0})
    with pytest.raises(TaskConstraintError):
        bad.validate_for(t31)


# ============ FORMATTING ============

def test_label_rendering(t42):
    assert bitstring((1, 2), 4) == "0110"
    assert parse_bitstring("0110") == (1, 2)
    assert format_key(t42, ((0, 1), (2,), 3)) == "p(4|1100,0010)"
    assert outcome_position(t42, (2,), 3) == 3
    with pytest.raises(ValueError):
        parse_bitstring("01a0")
