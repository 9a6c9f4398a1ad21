import json
import math

import numpy as np
import pytest

from lionskit.derivation import boundary_form
from lionskit.evolution import (
    EvolutionProblem,
    GelfandTriple,
    compute_diagnostics,
    convergence_study,
    dense_derivation_solve,
    discrete_ibp_check,
    discretize,
    energy_profile,
    preset_problem,
    propagator,
    propagator_contraction,
    random_problem,
    regularity_ratio,
    solve_all_at_once,
    solve_shooting,
    stacked_sigma_min,
)
from lionskit.evolution.export import (
    NOT_APPLICABLE,
    DiagnosticsRecord,
    convergence_csv,
    diagnostics_json,
    trajectory_csv,
    write_text,
)
from lionskit.evolution.presets import (
    ExponentialSolution,
    ZeroForcing,
    boundary_map,
    constant_form,
    manufacture,
    polynomial_form,
)
from lionskit.evolution.study import observed_order
from lionskit.exceptions import ArgumentError, AssumptionError, InvariantViolation


def scalar_problem(coefficient: float, phi: float = 0.0, y0: float = 1.0) -> EvolutionProblem:
    triple = GelfandTriple.euclidean(1)
    return EvolutionProblem(
        triple=triple,
        form=constant_form([[coefficient]], triple),
        forcing=ZeroForcing(1),
        horizon=1.0,
        phi=np.array([[phi]]),
        y0=np.array([y0]),
    )


def relative_gap(a, b) -> float:
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


def test_gelfand_triple_embedding():
    triple = GelfandTriple(gram_U=2.0 * np.eye(2), gram_H=np.eye(2))
    assert triple.embed_const == pytest.approx(1 / math.sqrt(2))
    assert triple.n == 2


def test_gelfand_triple_shape_mismatch():
    with pytest.raises(ArgumentError):
        GelfandTriple(gram_U=np.eye(2), gram_H=np.eye(3))


def test_form_claims(rng):
    problem = random_problem(rng, 3)
    report = problem.form.check(problem.triple, np.linspace(0.0, 1.0, 33))
    assert report.coercive
    assert report.bounded
    assert report.alpha > 0


def test_polynomial_form_claims():
    triple = GelfandTriple.euclidean(2)
    form = polynomial_form([np.eye(2), np.diag([1.0, 2.0])], triple, horizon=1.0)
    np.testing.assert_allclose(form(0.5), np.diag([1.5, 2.0]))
    assert form.alpha == pytest.approx(1.0)


def test_problem_rejects_expanding_boundary_map():
    with pytest.raises(AssumptionError) as ex:
        scalar_problem(1.0, phi=1.5)
    assert ex.match("not a contraction")


def test_problem_rejects_bad_shapes():
    triple = GelfandTriple.euclidean(2)
    with pytest.raises(ArgumentError):
        EvolutionProblem(
            triple=triple,
            form=constant_form(np.eye(2), triple),
            forcing=ZeroForcing(2),
            horizon=1.0,
            phi=np.zeros((1, 1)),
            y0=np.zeros(2),
        )


def test_boundary_map_presets():
    triple = GelfandTriple.euclidean(3)
    np.testing.assert_array_equal(boundary_map("initial", triple), np.zeros((3, 3)))
    np.testing.assert_array_equal(boundary_map("antiperiodic", triple), -np.eye(3))
    rotation = boundary_map("scaled-rotation", triple, scale=0.5, angle=math.pi / 4)
    assert np.linalg.norm(rotation, 2) == pytest.approx(0.5)
    with pytest.raises(ArgumentError):
        boundary_map("unknown", triple)


def test_discretize_dimension(decay):
    disc = discretize(decay, 2)
    assert disc.dim == 3
    assert disc.instance.R.dim == 1
    assert disc.structure.check(disc.instance).passed


def test_discretize_rejects_bad_parameters(decay):
    with pytest.raises(ArgumentError):
        discretize(decay, 1)
    with pytest.raises(ArgumentError):
        discretize(decay, 8, theta=0.25)


def test_constant_grid_function_has_vanishing_boundary_form():
    problem = preset_problem("rotation")
    disc = discretize(problem, 5)
    u = np.tile([0.3, -1.2], 6)
    assert boundary_form(disc.instance, u, u) == pytest.approx(0.0, abs=1e-13)


def test_interior_grid_function_has_vanishing_boundary_form(rng):
    problem = random_problem(rng, 2)
    disc = discretize(problem, 10)
    v = rng.standard_normal(disc.dim)
    v[:2] = v[-2:] = 0.0
    w = rng.standard_normal(disc.dim)
    assert abs(boundary_form(disc.instance, v, w)) < 1e-12


def test_kernels_of_endpoint_evaluations_span(rng):
    disc = discretize(random_problem(rng, 2), 6)
    report = disc.structure.check(disc.instance)
    assert report.kernel_sum_dim == disc.dim
    assert report.passed


def test_discrete_ibp_weighted(rng):
    problem = random_problem(rng, 3)
    report = discrete_ibp_check(discretize(problem, 50), trials=100, seed=rng)
    assert report.max_residual < 1e-13
    assert report.passed


def test_discrete_ibp_tolerance_zero_fails(rng):
    problem = random_problem(rng, 3)
    assert not discrete_ibp_check(discretize(problem, 50), trials=20, seed=rng, tol=0.0).passed


@pytest.mark.parametrize("theta,tolerance", [(1.0, 1e-3), (0.5, 1e-5)])
def test_decay_final_value(decay, theta, tolerance):
    solution = solve_all_at_once(decay, 512, theta)
    assert solution.final[0] == pytest.approx(math.exp(-1.0), abs=tolerance)
    assert solution.initial[0] == pytest.approx(1.0)
    assert solution.diagnostics.boundary_residual < 1e-10


def test_forced_periodic(forced_periodic):
    solution = solve_all_at_once(forced_periodic, 512, theta=0.5)
    assert solution.initial[0] == pytest.approx(1.0 / (1.0 + 4.0 * math.pi**2), abs=1e-4)
    assert solution.initial[0] == pytest.approx(0.024715, abs=1e-4)
    assert abs(solution.initial[0] - solution.final[0]) < 1e-12


def test_homogeneous_problem_has_zero_solution(rng):
    template = random_problem(rng, 3)
    problem = EvolutionProblem(
        triple=template.triple,
        form=template.form,
        forcing=ZeroForcing(3),
        horizon=1.0,
        phi=template.phi,
        y0=np.zeros(3),
    )
    for solver in (solve_all_at_once, solve_shooting):
        assert np.abs(solver(problem, 16, 0.5).values).max() < 1e-12


def test_shooting_initial_value(decay):
    solution = solve_shooting(decay, 32)
    assert solution.initial[0] == 1.0
    assert solution.scheme == "shooting"


def test_shooting_periodic_scalar():
    problem = scalar_problem(1.0, phi=1.0, y0=0.0)
    solution = solve_shooting(problem, 16)
    np.testing.assert_allclose(solution.values, 0.0, atol=1e-14)


def test_shooting_agrees_with_all_at_once(rng):
    problem = random_problem(rng, 4)
    for theta in (1.0, 0.5):
        reference = solve_all_at_once(problem, 64, theta)
        shooting = solve_shooting(problem, 64, theta)
        assert relative_gap(shooting.values, reference.values) < 1e-8


@pytest.mark.parametrize("theta", [1.0, 0.5])
def test_dense_derivation_agrees_with_all_at_once(rng, theta):
    problem = random_problem(rng, 2)
    reference = solve_all_at_once(problem, 8, theta)
    dense = dense_derivation_solve(problem, 8, theta)
    assert relative_gap(dense.values, reference.values) < 1e-9
    assert dense.diagnostics.sigma_min > 0


def test_rejects_non_coercive_form():
    with pytest.raises(AssumptionError) as ex:
        solve_all_at_once(scalar_problem(-1.0), 8)
    assert ex.match("not coercive")


def test_rejects_bad_theta(decay):
    with pytest.raises(ArgumentError):
        solve_all_at_once(decay, 8, theta=0.3)
    with pytest.raises(ArgumentError):
        solve_shooting(decay, 1)


def test_propagator_without_form():
    assert propagator_contraction(scalar_problem(0.0), 8) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(AssumptionError):
        propagator_contraction(scalar_problem(0.0), 8, strict=True)


@pytest.mark.parametrize("steps", [4, 16, 64])
def test_propagator_scalar_decay(steps):
    norm = propagator_contraction(scalar_problem(1.0), steps, 1.0, strict=True)
    assert norm == pytest.approx((1.0 + 1.0 / steps) ** (-steps), rel=1e-12)
    assert math.exp(-1.0) < norm < 1.0


def test_propagator_random_midpoint(rng):
    problem = random_problem(rng, 3)
    assert propagator_contraction(problem, 32, 0.5) <= 1.0 + 1e-10
    assert propagator(problem, 32, 0.5).shape == (3, 3)


def test_energy_dissipation(decay):
    for theta in (0.5, 1.0):
        profile = energy_profile(solve_all_at_once(decay, 64, theta))
        assert np.all(np.diff(profile) <= 1e-15)


def test_stacked_sigma_min():
    assert stacked_sigma_min(preset_problem("rotation"), 8, 0.5) > 0


def test_diagnostics(rng):
    problem = random_problem(rng, 2)
    solution = solve_all_at_once(problem, 16, 0.5)
    diagnostics = solution.diagnostics
    assert diagnostics.boundary_residual < 1e-10
    assert diagnostics.stepping_residual < 1e-10
    assert diagnostics.propagator_norm < 1.0
    assert diagnostics.stability > 0
    assert diagnostics.w_norm > 0
    assert diagnostics.regularity_ratio > 0
    assert diagnostics.wall_time is None


def test_stability_bound(rng):
    problem = random_problem(rng, 2, zero_datum=True)
    disc = discretize(problem, 8, 1.0)
    solution = solve_all_at_once(problem, 8, 1.0, diagnostics=False)
    diagnostics = compute_diagnostics(solution, disc=disc, stability=True)
    assert disc.w_norm(solution.flat()) <= disc.load_norm() / diagnostics.stability * (1 + 1e-8)


def test_compute_diagnostics_boundary_tolerance(decay):
    solution = solve_all_at_once(decay, 8, diagnostics=False)
    solution.values[0] += 1e-6
    with pytest.raises(InvariantViolation) as ex:
        compute_diagnostics(solution)
    assert ex.match("Boundary residual")
    assert ex.value.report["boundary_residual"] == pytest.approx(1e-6, rel=1e-6)

    diagnostics = compute_diagnostics(solution, boundary_tol=1e-4)
    assert diagnostics.boundary_residual == pytest.approx(1e-6, rel=1e-6)


def test_dense_derivation_checks_weak_problem(rng):
    problem = random_problem(rng, 2)
    with pytest.raises(InvariantViolation) as ex:
        dense_derivation_solve(problem, 8, 1.0, wdp_tol=0.0)
    assert ex.match("weak problem")
    assert ex.value.report["wdp_residual"] >= 0.0


def test_regularity_ratio(decay, forced_periodic):
    assert regularity_ratio(solve_all_at_once(decay, 16)) is None
    assert regularity_ratio(solve_all_at_once(forced_periodic, 16)) > 0


def test_observed_order():
    assert observed_order((16, 0.1), (32, 0.05), 1e-11) == pytest.approx(1.0)
    assert observed_order((16, 0.1), (32, 1e-13), 1e-11) is None


def test_convergence_decay(decay):
    table = convergence_study(decay, [16, 32, 64, 128, 256, 512])
    assert len(table.rows) == 12
    for order in table.orders(1.0):
        assert order == pytest.approx(1.0, abs=0.15)
    for order in table.orders(0.5):
        assert order == pytest.approx(2.0, abs=0.2)


def test_convergence_rotation():
    table = convergence_study(preset_problem("rotation"), [64, 128, 256, 512])
    for order in table.orders(1.0)[-2:]:
        assert order == pytest.approx(1.0, abs=0.15)
    for order in table.orders(0.5)[-2:]:
        assert order == pytest.approx(2.0, abs=0.2)


def test_convergence_constant_is_exact():
    table = convergence_study(preset_problem("constant"), [16, 32, 64])
    assert max(row.error for row in table.rows) < 1e-12
    assert all(row.order is None for row in table.rows)


def test_convergence_requires_exact_solution():
    with pytest.raises(ArgumentError):
        convergence_study(scalar_problem(1.0), [16, 32])


def test_manufactured_problem_is_reproduced():
    triple = GelfandTriple.euclidean(1)
    form = constant_form([[2.0]], triple)
    problem = manufacture(triple, form, ExponentialSolution(np.array([1.0]), rate=0.5), np.zeros((1, 1)), 1.0)
    solution = solve_all_at_once(problem, 256, 0.5)
    assert solution.final[0] == pytest.approx(math.exp(-0.5), abs=1e-5)


def test_trajectory_csv(decay):
    solution = solve_all_at_once(decay, 4)
    lines = trajectory_csv(solution).splitlines()
    assert lines[0] == "t,u_1"
    assert len(lines) == 6
    assert lines[1] == "0,1"
    assert float(lines[-1].split(",")[1]) == pytest.approx((4 / 5) ** 4)


def test_convergence_csv():
    table = convergence_study(preset_problem("constant"), [16, 32], thetas=[1.0])
    lines = convergence_csv(table).splitlines()
    assert lines[0] == "N,theta,error,order"
    assert lines[1].startswith("16,1,")
    assert lines[1].endswith(NOT_APPLICABLE)
    assert lines[2].endswith(NOT_APPLICABLE)


def test_diagnostics_json(forced_periodic):
    solution = solve_all_at_once(forced_periodic, 16)
    document = json.loads(diagnostics_json(solution))
    assert document["problem"] == "forced-periodic"
    assert document["scheme"] == "all-at-once"
    assert document["steps"] == 16
    assert document["boundary_residual"] < 1e-10
    assert document["wall_time"] is None
    assert set(document) == set(DiagnosticsRecord.model_fields)


def test_diagnostics_json_is_deterministic(forced_periodic):
    first = diagnostics_json(solve_all_at_once(forced_periodic, 16))
    second = diagnostics_json(solve_all_at_once(forced_periodic, 16))
    assert first == second


def test_diagnostics_record_requires_diagnostics(decay):
    with pytest.raises(ValueError):
        DiagnosticsRecord.from_solution(solve_all_at_once(decay, 4, diagnostics=False))


def test_write_text(tmp_path):
    path = write_text(tmp_path / "nested" / "out.csv", "t,u_1\n")
    assert path.read_text() == "t,u_1\n"
