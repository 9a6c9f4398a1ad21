import numpy as np
import pytest
import scipy.linalg

from lionskit.derivation import (
    BoundaryStructure,
    ContractionBC,
    DerivationInstance,
    assemble_sdp,
    b_orthogonal,
    boundary_form,
    endpoint_structure,
    induced_contraction,
    is_admissible,
    is_maximal_admissible,
    is_strongly_admissible,
    joint_lift,
    random_contraction,
    random_instance,
    solve_sdp,
    solve_sdp_report,
    solve_wdp,
    spectral_boundary_structure,
    stability_constant,
    verify_wdp,
    z_phi,
)
from lionskit.derivation.solver import unconstrained_solve
from lionskit.evolution import discretize, preset_problem
from lionskit.exceptions import ArgumentError, AssumptionError, InvariantViolation
from lionskit.hilbert import (
    InnerSpace,
    LinearMap,
    Subspace,
    principal_angles,
    range_space,
    same_subspace,
    subspace_intersection,
)
from lionskit.rtl import perturbation_beta, random_coercive


@pytest.fixture
def split_instance() -> DerivationInstance:
    """Boundary form ``diag(1, -1)`` on the Euclidean plane."""
    return DerivationInstance.create(InnerSpace.euclidean(2), np.diag([0.5, -0.5]))


@pytest.fixture
def endpoint_disc():
    """Implicit Euler on two steps for ``u' + u = 0``: grid functions ``(u_0, u_1, u_2)``."""
    return discretize(preset_problem("decay"), 2)


@pytest.fixture
def sampled(rng):
    instance, bs = random_instance(rng, test_dim=2, boundary_dim=2)
    return instance, bs, random_contraction(rng, bs)


def strong_data(instance, cbc, op, u):
    """Load and boundary datum for which ``u`` solves the strong problem."""
    bs = cbc.bs
    f = instance.D(u) + op(u)
    y0 = bs.B0(u) - cbc.effective.adjoint()(bs.B1(u))
    return f, y0


def test_instance_graph_space(split_instance):
    np.testing.assert_allclose(split_instance.W.gram, 1.25 * np.eye(2))
    np.testing.assert_allclose(split_instance.form_matrix, np.diag([1.0, -1.0]))


def test_instance_rejects_test_space_outside_annihilator():
    with pytest.raises(AssumptionError):
        DerivationInstance.create(InnerSpace.euclidean(2), np.diag([0.5, -0.5]), test_vectors=np.array([1.0, 0.0]))


def test_spectral_structure(split_instance):
    bs = spectral_boundary_structure(split_instance)
    assert bs.check(split_instance).passed
    W = split_instance.W
    assert same_subspace(bs.ker_B1, Subspace.span(W, np.array([0.0, 1.0])))
    assert same_subspace(bs.ker_B0, Subspace.span(W, np.array([1.0, 0.0])))


def test_spectral_structure_random(rng):
    instance, _ = random_instance(rng, test_dim=1, boundary_dim=2, complex_=True)
    assert spectral_boundary_structure(instance).check(instance).passed


@pytest.mark.parametrize("complex_", [False, True])
def test_adjoint_ranges_meet_trivially(rng, complex_):
    instance, sampled_bs = random_instance(rng, test_dim=1, boundary_dim=2, complex_=complex_)
    spectral = spectral_boundary_structure(instance)
    for bs in (spectral, sampled_bs):
        first = range_space(bs.B0.adjoint())
        second = range_space(bs.B1.adjoint())
        assert first.dim == second.dim == 2
        assert subspace_intersection(first, second).dim == 0
    angles = principal_angles(range_space(spectral.B0.adjoint()), range_space(spectral.B1.adjoint()))
    np.testing.assert_allclose(angles, np.pi / 2, atol=1e-8)


def test_spectral_structure_of_discretized_instance(endpoint_disc):
    instance = endpoint_disc.instance
    spectral = spectral_boundary_structure(instance)
    assert spectral.check(instance).passed
    assert spectral.ran_B0.dim == spectral.ran_B1.dim == 1
    np.testing.assert_allclose(spectral.form_matrix, endpoint_disc.structure.form_matrix, rtol=1e-9, atol=1e-9)


def test_admissibility(split_instance):
    bs = spectral_boundary_structure(split_instance)
    test_space = split_instance.R
    assert is_admissible(bs, bs.ker_B1, test_space)
    certificate = is_admissible(bs, bs.ker_B0, test_space)
    assert not certificate
    assert certificate.witness is not None
    assert certificate.largest_value > 0
    assert is_strongly_admissible(bs, bs.ker_B1, test_space)


def test_discrete_boundary_form(endpoint_disc, rng):
    instance = endpoint_disc.instance
    assert instance.dim == 3
    v = rng.standard_normal(3)
    w = rng.standard_normal(3)
    assert boundary_form(instance, v, w) == pytest.approx(v[2] * w[2] - v[0] * w[0])
    assert endpoint_disc.structure.check(instance).passed


def test_endpoint_structure(endpoint_disc):
    instance = endpoint_disc.instance
    bs = endpoint_disc.structure
    H = bs.H
    assert endpoint_structure(instance, H, bs.B0.coeffs, bs.B1.coeffs).check(instance).passed
    with pytest.raises(AssumptionError):
        endpoint_structure(instance, H, bs.B1.coeffs, bs.B0.coeffs)


def test_structure_rejects_mismatched_boundary_space(endpoint_disc):
    bs = endpoint_disc.structure
    other = InnerSpace.euclidean(2)
    with pytest.raises(ArgumentError):
        BoundaryStructure(H=other, B0=bs.B0, B1=bs.B1)


def test_z_phi_zero_is_kernel_of_b1(endpoint_disc):
    assert same_subspace(z_phi(endpoint_disc.cbc), endpoint_disc.structure.ker_B1)


def test_z_phi_antiperiodic(endpoint_disc):
    bs = endpoint_disc.structure
    cbc = ContractionBC(bs=bs, phi=LinearMap(bs.H, bs.H, -np.eye(1)))
    basis = z_phi(cbc).basis
    assert z_phi(cbc).dim == 2
    np.testing.assert_allclose(basis[-1], -basis[0], atol=1e-12)


def test_contraction_rejects_large_norm(endpoint_disc):
    bs = endpoint_disc.structure
    with pytest.raises(AssumptionError) as ex:
        ContractionBC(bs=bs, phi=LinearMap(bs.H, bs.H, np.array([[1.5]])))
    assert ex.match("not a contraction")
    assert ex.value.value == pytest.approx(1.5)


def test_b_orthogonal_of_zero_is_everything(split_instance):
    bs = spectral_boundary_structure(split_instance)
    W = split_instance.W
    assert b_orthogonal(bs, Subspace.zero(W)).dim == W.dim


def test_b_orthogonal_is_adjoint_space(sampled):
    _, bs, cbc = sampled
    orthogonal = b_orthogonal(bs, z_phi(cbc))
    adjoint_space = z_phi(cbc.adjoint())
    assert orthogonal.dim == adjoint_space.dim
    assert principal_angles(orthogonal, adjoint_space).max(initial=0.0) < 1e-8
    assert same_subspace(b_orthogonal(bs, orthogonal), z_phi(cbc))


def test_z_phi_is_maximal_admissible(sampled, rng):
    instance, bs, cbc = sampled
    subspace = z_phi(cbc)
    assert is_strongly_admissible(bs, subspace, instance.R)
    assert is_maximal_admissible(bs, subspace, instance.R, candidates=50, seed=rng)


def test_joint_lift_zero(split_instance):
    bs = spectral_boundary_structure(split_instance)
    np.testing.assert_allclose(joint_lift(bs, np.zeros(2), np.zeros(2)), 0.0)


def test_joint_lift_endpoints(endpoint_disc):
    bs = endpoint_disc.structure
    w = joint_lift(bs, np.array([2.0]), np.array([-3.0]))
    assert w[0] == pytest.approx(2.0)
    assert w[-1] == pytest.approx(-3.0)


def test_joint_lift_random(sampled, rng):
    _, bs, _ = sampled
    x0 = bs.B0(rng.standard_normal(bs.W.dim))
    x1 = bs.B1(rng.standard_normal(bs.W.dim))
    w = joint_lift(bs, x0, x1)
    np.testing.assert_allclose(bs.B0(w), x0, atol=1e-9)
    np.testing.assert_allclose(bs.B1(w), x1, atol=1e-9)


def test_induced_contraction_of_kernel(split_instance):
    bs = spectral_boundary_structure(split_instance)
    assert induced_contraction(bs, bs.ker_B1).norm == pytest.approx(0.0, abs=1e-12)


def test_induced_contraction_recovers_map(sampled):
    _, bs, cbc = sampled
    induced = induced_contraction(bs, z_phi(cbc))
    assert (induced.effective - cbc.effective).operator_norm() < 1e-9


def test_induced_contraction_rejects_inadmissible(split_instance):
    bs = spectral_boundary_structure(split_instance)
    with pytest.raises(AssumptionError):
        induced_contraction(bs, bs.ker_B0)


def test_solve_sdp_homogeneous(sampled, rng):
    instance, bs, cbc = sampled
    op = random_coercive(rng, instance.V)
    u = solve_sdp(instance, cbc, op, np.zeros(instance.V.dim), np.zeros(bs.H.dim))
    np.testing.assert_allclose(u, 0.0, atol=1e-12)


def test_solve_sdp_satisfies_weak_problem(sampled, rng):
    instance, bs, cbc = sampled
    op = random_coercive(rng, instance.V)
    expected = instance.W.random_vector(rng)
    f, y0 = strong_data(instance, cbc, op, expected)
    report = solve_sdp_report(instance, cbc, op, f, y0)
    assert report.sigma_min > 0
    assert instance.W.norm(report.u - expected) <= 1e-8 * instance.W.norm(expected)
    assert verify_wdp(instance, cbc, op, f, y0, report.u).passed

    perturbation = z_phi(cbc).basis[:, 0]
    perturbed = verify_wdp(instance, cbc, op, f, y0, report.u + perturbation)
    assert not perturbed.passed


def test_solve_sdp_rejects_inconsistent_load(sampled, rng):
    instance, bs, cbc = sampled
    op = random_coercive(rng, instance.V)
    f, y0 = strong_data(instance, cbc, op, instance.W.random_vector(rng))
    with pytest.raises(InvariantViolation) as ex:
        solve_sdp(instance, cbc, op, f + instance.V.random_vector(rng), y0)
    assert ex.match("inconsistent")


def test_solve_sdp_zero_contraction_is_constrained_solve(rng):
    instance, bs = random_instance(rng, test_dim=1, boundary_dim=2)
    cbc = random_contraction(rng, bs, kind="zero")
    assert same_subspace(z_phi(cbc), bs.ker_B1)
    op = random_coercive(rng, instance.V)
    constrained = bs.ker_B0
    f, y0 = strong_data(instance, cbc, op, constrained.basis @ rng.standard_normal(constrained.dim))
    u = solve_sdp(instance, cbc, op, f, y0)

    graph = instance.V.whiten((instance.D.coeffs + op.coeffs) @ constrained.basis)
    coefficients, *_ = scipy.linalg.lstsq(graph, instance.V.whiten(f))
    direct = constrained.basis @ coefficients
    assert instance.W.norm(u - direct) <= 1e-8 * instance.W.norm(direct)
    assert verify_wdp(instance, cbc, op, f, y0, u).passed


def test_solve_sdp_without_boundary_form(rng):
    V = InnerSpace.random(rng, 4)
    skew = rng.standard_normal((4, 4))
    instance = DerivationInstance.create(V, (skew - skew.T) / 2)
    bs = spectral_boundary_structure(instance)
    assert bs.ran_B0.dim == bs.ran_B1.dim == 0
    cbc = ContractionBC(bs=bs, phi=LinearMap.zero(bs.H))
    op = random_coercive(rng, V)
    f = rng.standard_normal(4)
    u = solve_sdp(instance, cbc, op, f, np.zeros(bs.H.dim))
    np.testing.assert_allclose(u, unconstrained_solve(instance, op, f), rtol=1e-9, atol=1e-10)


def test_solve_sdp_rejects_datum_outside_range(rng):
    instance, bs = random_instance(rng, test_dim=1, boundary_dim=2, initial_rank=1)
    cbc = random_contraction(rng, bs, kind="zero")
    op = random_coercive(rng, instance.V)
    outside = bs.ran_B0.complement().basis[:, 0]
    with pytest.raises(AssumptionError) as ex:
        solve_sdp(instance, cbc, op, np.zeros(instance.V.dim), outside)
    assert ex.match("not in the range of B0")


def test_solve_sdp_rejects_datum_of_wrong_shape(endpoint_disc):
    with pytest.raises(ArgumentError):
        solve_sdp(
            endpoint_disc.instance,
            endpoint_disc.cbc,
            endpoint_disc.operator,
            endpoint_disc.load,
            [1.0, 2.0],
            check_coercivity=False,
        )


def test_solve_sdp_requires_coercive_operator(sampled):
    instance, bs, cbc = sampled
    with pytest.raises(AssumptionError):
        solve_sdp(instance, cbc, LinearMap.zero(instance.V), np.zeros(instance.V.dim), np.zeros(bs.H.dim))


def test_assemble_sdp_shape(sampled, rng):
    instance, bs, cbc = sampled
    op = random_coercive(rng, instance.V)
    system = assemble_sdp(instance, cbc, op, np.zeros(instance.V.dim), np.zeros(bs.H.dim))
    assert system.equation_rows == instance.V.dim
    assert system.boundary_rows == bs.ran_B0.dim
    assert system.matrix.shape == (instance.V.dim + bs.ran_B0.dim, instance.W.dim)


def test_solve_wdp_on_z_phi(sampled, rng):
    instance, bs, cbc = sampled
    op = random_coercive(rng, instance.V)
    f = rng.standard_normal(instance.V.dim)
    solution = solve_wdp(instance, z_phi(cbc), op, f)
    assert verify_wdp(instance, cbc, op, f, np.zeros(bs.H.dim), solution.u).passed


def test_solve_wdp_rejects_inadmissible_test_space(split_instance):
    bs = spectral_boundary_structure(split_instance)
    op = LinearMap.identity(split_instance.V)
    with pytest.raises(AssumptionError):
        solve_wdp(split_instance, bs.ker_B0, op, np.ones(2))


def test_form_tolerance_of_admissibility(split_instance, rng):
    bs = spectral_boundary_structure(split_instance)
    test_space = split_instance.R
    nearly_isotropic = Subspace.span(split_instance.W, np.array([1.0, 0.999]))
    assert not is_maximal_admissible(bs, nearly_isotropic, test_space, candidates=5, seed=rng).admissible
    assert is_maximal_admissible(bs, nearly_isotropic, test_space, candidates=5, seed=rng, form_tol=1e-2).admissible

    op = LinearMap.identity(split_instance.V)
    with pytest.raises(AssumptionError):
        solve_wdp(split_instance, nearly_isotropic, op, np.ones(2))
    assert solve_wdp(split_instance, nearly_isotropic, op, np.ones(2), form_tol=1e-2).nullity == 1


def test_stability_constant_without_boundary():
    instance = DerivationInstance.create(InnerSpace.euclidean(2), np.zeros((2, 2)))
    bs = spectral_boundary_structure(instance)
    cbc = ContractionBC(bs=bs, phi=LinearMap.zero(bs.H))
    op = LinearMap.identity(instance.V)
    assert stability_constant(instance, op, cbc) == pytest.approx(1.0)
    np.testing.assert_allclose(unconstrained_solve(instance, op, np.array([1.0, 2.0])), [1.0, 2.0])


def test_stability_constant_matches_perturbation_constant(rng):
    V = InnerSpace.random(rng, 3)
    skew = rng.standard_normal((3, 3))
    instance = DerivationInstance.create(V, (skew - skew.T) / 2)
    bs = spectral_boundary_structure(instance)
    cbc = ContractionBC(bs=bs, phi=LinearMap.zero(bs.H))
    for alpha in (0.25, 0.5, 1.0, 2.0):
        op = LinearMap.identity(V) * alpha
        beta = stability_constant(instance, op, cbc)
        assert beta >= perturbation_beta(op).beta - 1e-10
        if alpha <= 1.0:
            # A skew pairing of odd dimension has a kernel, which attains the constant.
            assert beta == pytest.approx(alpha, rel=1e-8)


def test_stability_bound(sampled, rng):
    instance, bs, cbc = sampled
    op = random_coercive(rng, instance.V)
    beta = stability_constant(instance, op, cbc)
    homogeneous = z_phi(cbc.adjoint())
    f, y0 = strong_data(instance, cbc, op, homogeneous.basis @ rng.standard_normal(homogeneous.dim))
    assert bs.H.norm(y0) < 1e-10 * max(1.0, np.linalg.norm(f))
    u = solve_sdp(instance, cbc, op, f, np.zeros(bs.H.dim))
    dual_norm = np.linalg.norm(instance.V.whiten(f))
    assert instance.W.norm(u) <= dual_norm / beta * (1 + 1e-8)
