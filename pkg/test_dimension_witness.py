import numpy as np
import pytest
from numpy.testing import assert_allclose

from bounds_errors import MetricShapeError, ModelValidationError
from dimension_witness import (
    CONSISTENT,
    EXCLUDED,
    CommunicationMatrix,
    comm_matrix,
    dimension_witness,
    lambda_max,
    metric_bound_via_lambda,
    render_comm_matrix,
)
from game_core import SuccessMetric, behavior_of, canonical_metric, random_model, signed_metric, uniform_behavior
from reference_cases import orthogonal_t42_model


def test_comm_matrix_layout(t42):
    A = comm_matrix(uniform_behavior(t42), (3,))
    assert A.shape == (6, 3)
    assert A.columns == (0, 1, 2)
    assert A.measurement == (3,)
    assert_allclose(lambda_max(A), 1.0)


def test_matrix_validation():
    with pytest.raises(ModelValidationError):
        CommunicationMatrix(((0,), (1,)), (0, 1), np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(ModelValidationError):
        CommunicationMatrix(((0,),), (0, 1), np.array([[1.5, -0.5]]))
    with pytest.raises(ModelValidationError):
        CommunicationMatrix(((0,),), (0, 1, 2), np.array([[1.0, 0.0]]))


def test_perfect_qutrit_strategy_needs_three_dimensions(t42):
    behavior = behavior_of(orthogonal_t42_model(3))
    for b in t42.measurements:
        A = comm_matrix(behavior, b)
        assert_allclose(lambda_max(A), 3.0, atol=1e-9)
        assert dimension_witness(A, 2) == EXCLUDED
        assert dimension_witness(A, 3) == CONSISTENT


@pytest.mark.parametrize("d", [2, 3])
def test_random_models_never_exceed_their_dimension(t42, d):
    rng = np.random.default_rng([7, d])
    for _ in range(500):
        behavior = behavior_of(random_model(t42, d, rng))
        for b in t42.measurements:
            assert lambda_max(comm_matrix(behavior, b)) <= d + 1e-6


def test_seesaw_optima_respect_the_witness(seesaw_run, t42):
    behavior = behavior_of(seesaw_run(4, 2, 2).model)
    for b in t42.measurements:
        assert dimension_witness(comm_matrix(behavior, b), 2) == CONSISTENT


@pytest.mark.parametrize("d,expected", [(2, 8.0), (3, 12.0)])
def test_t42_lambda_bound(t42, d, expected):
    assert metric_bound_via_lambda(t42, canonical_metric(t42), d) == expected


def test_t41_lambda_bound_is_trivial_for_qubits(t41):
    assert metric_bound_via_lambda(t41, canonical_metric(t41), 2) == 12.0


def test_lambda_bound_shape_checks(t41, t42):
    with pytest.raises(MetricShapeError):
        metric_bound_via_lambda(t41, signed_metric(t41), 2)
    b = (3,)
    doubled = SuccessMetric(t42, {((0, 1), b, 2): 1.0, ((0, 2), b, 2): 1.0})
    with pytest.raises(MetricShapeError):
        metric_bound_via_lambda(t42, doubled, 2)
    with pytest.raises(ValueError):
        metric_bound_via_lambda(t42, canonical_metric(t41), 2)


def test_render_marks_highlighted_entries(t42):
    behavior = behavior_of(orthogonal_t42_model(3))
    A = comm_matrix(behavior, (3,))
    text = render_comm_matrix(t42, A, highlight=[((0, 1), (3,), 2)])
    assert text.startswith("M = 0001")
    assert "lambda_max = 3.000000" in text
    assert "[1.000000]" in text
    assert text.count("[") == 1
