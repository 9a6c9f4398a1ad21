import json
import math

import numpy as np
import pytest

from lionskit.exceptions import ArgumentError, AssumptionError
from lionskit.model import SuiteCounts, Tolerances
from lionskit.suite import (
    Tally,
    check_convergence,
    check_cross_solver,
    check_discrete_ibp,
    check_propagator,
    check_stability,
    jsonable,
    run_suite,
)

SMALL = SuiteCounts.scaled(0.02)


@pytest.mark.parametrize("name", ["rtl", "derivation"])
def test_run_suite_passes(name):
    report = run_suite(name, seed=7, counts=SMALL)
    assert report.suite == name
    assert report.passed, report.failed
    assert len(report.results) == 3
    assert all(result.count > 0 for result in report.results)
    assert report.elapsed is None
    assert all(result.elapsed is None for result in report.results)


def test_run_suite_is_deterministic():
    first = run_suite("rtl", seed=11, counts=SMALL)
    second = run_suite("rtl", seed=11, counts=SMALL)
    assert [r.worst_slack for r in first.results] == [r.worst_slack for r in second.results]


def test_run_suite_timing():
    report = run_suite("rtl", counts=SuiteCounts.scaled(0.005), timing=True)
    assert report.elapsed > 0
    assert all(result.elapsed is not None for result in report.results)


def test_run_suite_unknown():
    with pytest.raises(ArgumentError):
        run_suite("heat")


def test_check_discrete_ibp(rng):
    tally = check_discrete_ibp(rng, Tolerances(), SMALL)
    result = tally.result(timing=False)
    assert result.passed
    assert result.count == SMALL.ibp_pairs


def test_check_discrete_ibp_without_tolerance(rng):
    result = check_discrete_ibp(rng, Tolerances.uniform(0.0), SMALL).result(timing=False)
    assert not result.passed
    assert result.witness["residual"] > 0


def test_check_convergence_decay():
    result = check_convergence(Tolerances(), "decay", asymptotic=5).result(timing=False)
    assert result.passed, result.witness


def test_check_convergence_forced_periodic():
    result = check_convergence(Tolerances(), "forced-periodic", asymptotic=3).result(timing=False)
    assert result.passed, result.witness
    assert result.count == 3


def test_check_cross_solver_and_stability(rng):
    counts = SuiteCounts(problems=2)
    assert check_cross_solver(rng, Tolerances(), counts).result(timing=False).passed
    assert check_stability(rng, Tolerances(), counts).result(timing=False).passed


def test_check_propagator():
    result = check_propagator(Tolerances()).result(timing=False)
    assert result.passed, result.witness
    assert result.count == 12


def test_tally_keeps_first_witness_and_worst_slack():
    tally = Tally("example")
    tally.record(0.5)
    tally.record(-1.0, witness={"first": np.float64(1.0)})
    tally.record(-2.0, witness={"second": 2})
    tally.record(math.inf)
    result = tally.result(timing=False)
    assert not result.passed
    assert result.count == 4
    assert result.failures == 2
    assert result.worst_slack == -2.0
    assert result.witness == {"first": 1.0}


def test_tally_records_errors():
    tally = Tally("example")
    tally.error(AssumptionError("not coercive"), {"index": 3})
    result = tally.result(timing=False)
    assert not result.passed
    assert result.witness == {"error": "AssumptionError", "message": "not coercive", "context": {"index": 3}}


def test_empty_tally_fails():
    assert not Tally("example").result(timing=False).passed


def test_jsonable():
    value = {"array": np.array([1.0, 2.0]), "complex": 1 + 2j, "inf": math.inf, 3: (np.int64(4),)}
    assert jsonable(value) == {"array": [1.0, 2.0], "complex": [1.0, 2.0], "inf": "inf", "3": [4]}
    json.dumps(jsonable(np.array([1 + 1j, 2 - 1j])))
