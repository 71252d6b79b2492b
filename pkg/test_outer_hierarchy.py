import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from game_core import Behavior, TaskSpec, behavior_of, canonical_metric, signed_metric, uniform_behavior
from outer_hierarchy import (
    ADJOINT,
    IDENTITY,
    MonomialBasis,
    build_program,
    effect_parametrization,
    moment_size,
    outer_bound_u1,
    outer_feasible,
)
from reference_cases import contextual_t41_equivalences, orthogonal_t42_model, trine_qubit_model


@pytest.mark.parametrize("n,m,size", [(4, 1, (4, 13)), (3, 1, (3, 7)), (4, 2, (6, 25))])
def test_moment_size(n, m, size):
    assert moment_size(TaskSpec(n, m)) == size


def test_basis_layout():
    basis = MonomialBasis.level_one(["U", "V"])
    assert basis.labels == (IDENTITY, "U", "U" + ADJOINT, "V", "V" + ADJOINT)
    assert basis.unitaries == ["U", "V"]
    assert basis.index("V" + ADJOINT) == 4


def test_binary_effects_share_one_unitary(t41):
    unitaries, forms = effect_parametrization(t41)
    assert len(unitaries) == len(t41.measurements)
    b = (2, 3)
    first, second = forms[(b, 0)], forms[(b, 1)]
    assert first[2] == second[2] == "U[0011]"
    assert first[0] + second[0] == 1.0
    assert first[1] == -second[1]


def test_multi_outcome_effects_get_one_unitary_each(t42):
    unitaries, forms = effect_parametrization(t42)
    assert len(unitaries) == 3 * len(t42.measurements)
    assert forms[((0,), 1)][2] == "U[1000]2"


def test_contextual_t41_bound(t41):
    value, program = outer_bound_u1(t41, signed_metric(t41), contextual_t41_equivalences())
    assert_allclose(value, 2 + 2 * math.sqrt(2), atol=1e-6)
    for gamma in program.gammas.values():
        assert_allclose(np.diag(gamma).real, 1.0, atol=1e-6)
        assert np.linalg.eigvalsh((gamma + gamma.conj().T) / 2).min() > -1e-6


def test_bound_dominates_known_models(t31, t42):
    value31, _ = outer_bound_u1(t31, canonical_metric(t31))
    assert value31 >= 3 * (1 + math.sqrt(3) / 2) - 1e-6
    # no equivalences: every block decouples and each row can succeed
    assert_allclose(value31, 6.0, atol=1e-6)
    value42, _ = outer_bound_u1(t42, canonical_metric(t42))
    assert value42 >= 12.0 - 1e-6
    assert value42 <= 12.0 + 1e-6


def test_program_dump_is_auditable(t41):
    program = build_program(t41, canonical_metric(t41))
    dump = program.to_dict()
    assert dump["basis"][0] == IDENTITY
    assert len(dump["blocks"]) == 4
    assert dump["program"]["kind"] == "sdp"
    assert all(size == 26 for size in dump["program"]["blocks"].values())


def test_metric_task_mismatch(t41, t31):
    with pytest.raises(ValueError):
        outer_bound_u1(t41, canonical_metric(t31))


def test_quantum_behaviors_are_feasible(t31, t42):
    assert outer_feasible(t31, behavior_of(trine_qubit_model()))
    assert outer_feasible(t42, behavior_of(orthogonal_t42_model(3)))
    assert outer_feasible(t42, uniform_behavior(t42))


def test_equivalence_violation_is_infeasible(t41):
    probs = {}
    for a in t41.preparations:
        for b in t41.measurements:
            first, second = t41.outcomes(b)
            hit = 1.0 if a in [(0,), (1,)] else 0.0
            probs[(a, b, first)] = hit
            probs[(a, b, second)] = 1.0 - hit
    behavior = Behavior(t41, probs)
    assert outer_feasible(t41, behavior)
    assert not outer_feasible(t41, behavior, contextual_t41_equivalences())
