import json

import pytest
from pydantic import ValidationError

from lionskit.model import (
    DiscretizationSpec,
    FormSpec,
    PhiSpec,
    RunConfig,
    SuiteCounts,
    Tolerances,
    emit,
    normalize,
    parse,
)

CUSTOM_CONFIG = {
    "mode": "solve",
    "problem": {
        "dimension": 2,
        "gram_H": [[2.0, 0.0], [0.0, 1.0]],
        "form": {"kind": "constant", "matrix": [[2.0, 1.0], [0.0, 2.0]]},
        "phi": {"kind": "scaled-rotation", "scale": 0.5, "angle": 0.7},
        "forcing": {"kind": "trigonometric", "cosine": [1.0, 0.0], "sine": [0.0, 1.0]},
        "y0": [0.0, 0.0],
    },
    "discretization": {"steps": 32, "theta": 0.5},
}


@pytest.mark.parametrize("document", [CUSTOM_CONFIG, {"mode": "verify", "suite": "rtl", "seed": 3}])
def test_roundtrip(document):
    assert json.loads(emit(parse(json.dumps(document)))) == normalize(document)


def test_normalize_fills_defaults(decay_config):
    normalized = normalize(decay_config)
    assert normalized["seed"] == 7
    assert normalized["suite"] == "all"
    assert normalized["problem"]["phi"]["kind"] == "initial"
    assert normalized["discretization"]["sweep"] == [16, 32, 64, 128, 256, 512]
    assert normalized["tolerances"]["ibp"] == 1e-13
    assert normalized["output"]["timing"] is False


def test_normalize_is_idempotent(decay_config):
    assert normalize(normalize(decay_config)) == normalize(decay_config)


def test_form_requires_fields_of_its_kind():
    with pytest.raises(ValidationError) as ex:
        FormSpec(kind="polynomial")
    assert ex.match("requires: coefficients")
    with pytest.raises(ValidationError):
        FormSpec(kind="trigonometric", mean=[[1.0]])


def test_explicit_phi_requires_matrix():
    with pytest.raises(ValidationError):
        PhiSpec(kind="explicit")
    assert PhiSpec(kind="explicit", matrix=[[0.5]]).matrix == [[0.5]]


def test_unknown_fields_are_rejected():
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"mode": "verify", "sede": 7})


def test_solve_requires_problem():
    with pytest.raises(ValidationError) as ex:
        RunConfig.model_validate({"mode": "solve"})
    assert ex.match("requires: problem")
    assert RunConfig.model_validate({"mode": "verify"}).problem is None


def test_custom_problem_requires_dimension():
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"mode": "solve", "problem": {"form": {"matrix": [[1.0]]}}})


def test_manufactured_forcing_requires_exact_solution():
    with pytest.raises(ValidationError):
        RunConfig.model_validate(
            {"problem": {"dimension": 1, "form": {"matrix": [[1.0]]}, "forcing": {"kind": "manufactured"}}}
        )


@pytest.mark.parametrize("discretization", [{"steps": 1}, {"theta": 0.25}, {"theta": 1.5}, {"sweep": [1, 2]}])
def test_discretization_ranges(discretization):
    with pytest.raises(ValidationError):
        DiscretizationSpec(**discretization)


def test_tolerances_uniform():
    tolerances = Tolerances.uniform(0.0)
    assert tolerances.ibp == 0.0
    assert tolerances.agreement == 0.0
    assert Tolerances().rank == 1e-10


def test_tolerances_reject_negative_values():
    with pytest.raises(ValidationError):
        Tolerances(rank=-1.0)


def test_suite_counts_scaled():
    counts = SuiteCounts.scaled(0.01)
    assert counts.operators == 2
    assert counts.ibp_pairs == 10
    assert counts.functionals == 1
    assert SuiteCounts.scaled(1.0) == SuiteCounts()
