import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from contextuality import FarkasCertificate
from game_core import TaskSpec, behavior_of, random_behavior
from reference_cases import contextual_t42_equivalences, optimal_t42_bit_strategy, trine_qubit_model
from schemas import (
    METHODS,
    CheckResult,
    ExperimentConfig,
    MethodResult,
    QuantumModelModel,
    Report,
    behavior_from_model,
    behavior_to_model,
    certificate_from_model,
    certificate_to_model,
    equivalence_from_model,
    equivalence_to_model,
    quantum_model_from_model,
    quantum_model_to_model,
    strategy_from_model,
    strategy_to_model,
)


def test_config_expands_all_methods():
    config = ExperimentConfig(task=(4, 1), methods=["all"])
    assert config.methods == METHODS
    ordered = ExperimentConfig(task=(4, 1), methods=["witness", "classical"])
    assert ordered.methods == ["classical", "witness"]


@pytest.mark.parametrize(
    "overrides",
    [{"methods": ["magic"]}, {"dims": [0]}, {"restarts": 0}, {"epsilon": 0.0}, {"metric": "weighted"}],
)
def test_config_rejects_bad_values(overrides):
    with pytest.raises(ValidationError):
        ExperimentConfig(task=(4, 1), **overrides)


def test_config_parses_json_equivalences():
    config = ExperimentConfig.model_validate({
        "task": [4, 2],
        "methods": ["contextual"],
        "prep_equivalences": [
            {
                "kind": "preparation",
                "side_a": [{"label": [0, 1], "weight": 0.5}, {"label": [0, 2], "weight": 0.5}],
                "side_b": [{"label": [0, 3], "weight": 0.5}, {"label": [1, 2], "weight": 0.5}],
            }
        ],
    })
    eq = equivalence_from_model(config.prep_equivalences[0])
    assert eq == contextual_t42_equivalences()[0]


def test_equivalence_models_keep_weights():
    for eq in contextual_t42_equivalences():
        assert equivalence_from_model(equivalence_to_model(eq)) == eq


def test_effect_equivalence_needs_outcomes():
    model = equivalence_to_model(contextual_t42_equivalences()[0]).model_copy(update={"kind": "effect"})
    with pytest.raises(ValueError):
        equivalence_from_model(model)


def test_behavior_and_model_conversion(rng):
    task = TaskSpec(4, 2)
    behavior = random_behavior(task, rng)
    assert behavior_from_model(behavior_to_model(behavior)).probabilities == behavior.probabilities

    model = trine_qubit_model()
    dumped = quantum_model_to_model(model)
    assert set(dumped.states) == {"100", "010", "001"}
    restored = quantum_model_from_model(QuantumModelModel.model_validate_json(dumped.model_dump_json()))
    for a in model.states:
        assert_allclose(restored.states[a], model.states[a], atol=1e-15)
    assert_allclose(behavior_of(restored).p((0,), (1,), 2), behavior_of(model).p((0,), (1,), 2))


def test_strategy_conversion():
    strategy = optimal_t42_bit_strategy()
    dumped = strategy_to_model(strategy)
    assert dumped.encoding["1100"] == 0
    assert strategy_from_model(dumped).correct_count() == 8


def test_certificate_conversion():
    task = TaskSpec(4, 1)
    cert = FarkasCertificate(task, {((0,), (1, 2), 0): 0.25, ((1,), (0, 2), 0): -0.25}, 1.0, 1.2)
    dumped = certificate_to_model(cert)
    assert "p(1|1000,0110)" in dumped.inequality
    back = certificate_from_model(dumped)
    assert back.coefficients == cert.coefficients
    assert back.ratio == pytest.approx(1.2)


def test_report_flags():
    report = Report(
        results=[MethodResult(method="classical"), MethodResult(method="outer", status="failed", error="boom")],
        checks=[CheckResult(name="x", expected=1.0, observed=1.0, passed=True)],
    )
    assert report.has_failures
    assert report.all_passed
    clone = Report.model_validate_json(report.model_dump_json())
    assert clone.results[1].error == "boom"
    assert np.isclose(clone.checks[0].observed, 1.0)


def test_report_json_keeps_values_and_artifacts(tmp_path):
    result = MethodResult(
        method="contextual",
        parameters={"kind": "feasibility", "dimension": 2},
        values={"feasible": False, "distance": 0.125, "ratio": 1.4142135623730951},
        tolerances={"nc_slack": 1e-7},
        artifacts={"slack_program": {"kind": "lp", "objective": [0.0, 1.0], "bounds": None}},
    )
    report = Report(results=[result], checks=[CheckResult(name="x", expected=4.0, observed=4.0, passed=True, note="n")])
    path = tmp_path / "report.json"
    path.write_text(report.model_dump_json())
    clone = Report.model_validate_json(path.read_text())
    assert clone == report
    assert clone.results[0].values["ratio"] == 1.4142135623730951
    assert clone.results[0].artifacts["slack_program"]["bounds"] is None
