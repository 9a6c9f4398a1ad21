"""
Solvers for the discretized evolution problem.

Three independent routes reach the same grid function: the sparse all-at-once
system, shooting with the discrete fundamental map, and the dense strong
derivation problem on the discretized instance.
"""

import logging
import typing as t

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from lionskit.derivation import assemble_sdp, solve_sdp_report, stability_constant, verify_wdp
from lionskit.derivation.solver import SOLVER_RESIDUAL_TOL, WDP_RESIDUAL_TOL
from lionskit.evolution.discrete import (
    Discretization,
    TimeGrid,
    check_steps,
    check_theta,
    discretize,
    h_matrix_norm,
    h_norms,
    stage_data,
)
from lionskit.evolution.model import Diagnostics, DiscreteSolution, EvolutionProblem
from lionskit.exceptions import AssumptionError, InvariantViolation
from lionskit.hilbert import LinearMap

logger = logging.getLogger(__name__)

SINGULARITY_TOL = 1e-12
PROPAGATOR_TOL = 1e-10
BOUNDARY_RESIDUAL_TOL = 1e-10
DENSE_LIMIT = 600


def check_coercive(problem: EvolutionProblem, grid: TimeGrid, theta: float):
    """
    Sample the form on the grid and at the stage times.
    """
    times = np.concatenate([grid.nodes, grid.stage_times(theta)])
    report = problem.form.check(problem.triple, times)
    if not report.alpha > 0:
        raise AssumptionError(f"Form is not coercive on U (sampled alpha = {report.alpha:.3e})", value=report.alpha)


def _step_matrices(problem: EvolutionProblem, grid: TimeGrid, theta: float):
    """
    Per step ``left u_{k+1} = right u_k + f_k`` with ``left = G_H / dt + theta A_k``.
    """
    forms, forcing = stage_data(problem, grid, theta)
    mass = problem.triple.gram_H / grid.dt
    left = mass[None, :, :] + theta * forms
    right = mass[None, :, :] - (1.0 - theta) * forms
    return left, right, forcing


def stepping_system(problem: EvolutionProblem, steps: int, theta: float) -> t.Tuple[sp.csr_matrix, np.ndarray]:
    """
    Square block system: ``N n`` stepping rows and ``n`` coupling rows ``u_0 - Phi* u_N = y0``.
    """
    grid = TimeGrid(problem.horizon, steps)
    n = problem.n
    left, right, forcing = _step_matrices(problem, grid, theta)
    upper = sp.hstack([sp.block_diag(list(-right), format="csr"), sp.csr_matrix((steps * n, n))])
    lower = sp.hstack([sp.csr_matrix((steps * n, n)), sp.block_diag(list(left), format="csr")])
    coupling = sp.hstack(
        [sp.identity(n, format="csr"), sp.csr_matrix((n, (steps - 1) * n)), sp.csr_matrix(-problem.phi_adjoint)]
    )
    matrix = sp.vstack([upper + lower, coupling], format="csc")
    rhs = np.concatenate([forcing.reshape(-1), problem.y0])
    return matrix, rhs


def solve_all_at_once(
    problem: EvolutionProblem,
    steps: int,
    theta: float = 1.0,
    diagnostics: bool = True,
    boundary_tol: float = BOUNDARY_RESIDUAL_TOL,
) -> DiscreteSolution:
    check_steps(steps)
    check_theta(theta)
    grid = TimeGrid(problem.horizon, steps)
    check_coercive(problem, grid, theta)
    logger.info(f"All-at-once solve of {problem}: N={steps}, theta={theta}")
    matrix, rhs = stepping_system(problem, steps, theta)
    try:
        flat = scipy.sparse.linalg.spsolve(matrix, rhs)
    except RuntimeError as ex:
        raise InvariantViolation(f"All-at-once system is singular: {ex}") from ex
    values = np.asarray(flat).reshape(steps + 1, problem.n)
    if not np.all(np.isfinite(values)):
        raise InvariantViolation("All-at-once system is singular")
    solution = DiscreteSolution(problem=problem, grid=grid.nodes, values=values, theta=theta, scheme="all-at-once")
    if diagnostics:
        solution.diagnostics = compute_diagnostics(solution, boundary_tol=boundary_tol)
    return solution


def propagator(problem: EvolutionProblem, steps: int, theta: float = 1.0) -> np.ndarray:
    """
    Discrete fundamental map ``S_h``: ``N`` homogeneous theta-steps applied to the identity.
    """
    check_steps(steps)
    check_theta(theta)
    grid = TimeGrid(problem.horizon, steps)
    left, right, _ = _step_matrices(problem, grid, theta)
    fundamental = np.eye(problem.n)
    for k in range(steps):
        fundamental = scipy.linalg.solve(left[k], right[k] @ fundamental)
    return fundamental


def propagator_contraction(problem: EvolutionProblem, steps: int, theta: float = 1.0, strict: bool = False) -> float:
    """
    ``||S_h||`` in ``H``. With ``strict``, the form must be coercive and the norm is
    checked to stay below one.
    """
    check_theta(theta)
    grid = TimeGrid(problem.horizon, steps)
    if strict:
        check_coercive(problem, grid, theta)
    norm = h_matrix_norm(problem, propagator(problem, steps, theta))
    logger.debug(f"Propagator norm {norm:.12g} for N={steps}, theta={theta}")
    if norm > 1.0 + PROPAGATOR_TOL:
        raise InvariantViolation(f"Discrete propagator is not an H-contraction (norm {norm:.6g})", {"norm": norm})
    if strict and not norm < 1.0:
        raise InvariantViolation(f"Discrete propagator is not strictly contractive (norm {norm:.6g})", {"norm": norm})
    return norm


def solve_shooting(
    problem: EvolutionProblem,
    steps: int,
    theta: float = 1.0,
    diagnostics: bool = True,
    boundary_tol: float = BOUNDARY_RESIDUAL_TOL,
) -> DiscreteSolution:
    """
    Solve ``(I - Phi* S_h) u_0 = Phi* w_N + y0`` where ``w`` is the particular
    solution with ``w_0 = 0``, then march from ``u_0``.
    """
    check_steps(steps)
    check_theta(theta)
    grid = TimeGrid(problem.horizon, steps)
    check_coercive(problem, grid, theta)
    logger.info(f"Shooting solve of {problem}: N={steps}, theta={theta}")
    n = problem.n
    left, right, forcing = _step_matrices(problem, grid, theta)

    fundamental = np.eye(n)
    particular = np.zeros(n)
    factors = []
    for k in range(steps):
        factor = scipy.linalg.lu_factor(left[k])
        factors.append(factor)
        fundamental = scipy.linalg.lu_solve(factor, right[k] @ fundamental)
        particular = scipy.linalg.lu_solve(factor, right[k] @ particular + forcing[k])

    phi_adjoint = problem.phi_adjoint
    H = problem.triple.H
    shooting = np.eye(n) - phi_adjoint @ fundamental
    whitened = LinearMap(H, H, shooting).whitened()
    sigma_min = float(scipy.linalg.svdvals(whitened)[-1])
    if sigma_min <= SINGULARITY_TOL:
        raise InvariantViolation(
            f"Shooting matrix is singular (smallest singular value {sigma_min:.3e})", {"sigma_min": sigma_min}
        )
    initial = scipy.linalg.solve(shooting, phi_adjoint @ particular + problem.y0)

    values = np.empty((steps + 1, n), dtype=np.result_type(initial, particular))
    values[0] = initial
    for k in range(steps):
        values[k + 1] = scipy.linalg.lu_solve(factors[k], right[k] @ values[k] + forcing[k])
    solution = DiscreteSolution(problem=problem, grid=grid.nodes, values=values, theta=theta, scheme="shooting")
    if diagnostics:
        solution.diagnostics = compute_diagnostics(solution, boundary_tol=boundary_tol)
    return solution


def dense_derivation_solve(
    problem: EvolutionProblem,
    steps: int,
    theta: float = 1.0,
    boundary_tol: float = BOUNDARY_RESIDUAL_TOL,
    residual_tol: float = SOLVER_RESIDUAL_TOL,
    wdp_tol: float = WDP_RESIDUAL_TOL,
) -> DiscreteSolution:
    """
    Solve the discretized instance through the strong derivation problem.

    The solution is tested against the weak problem over ``Z_Phi`` as well.
    """
    disc = discretize(problem, steps, theta)
    check_coercive(problem, disc.grid, theta)
    # The tested form averages interval residuals onto nodes and is singular on V_h.
    report = solve_sdp_report(
        disc.instance, disc.cbc, disc.operator, disc.load, problem.y0, check_coercivity=False, tol=residual_tol
    )
    weak = verify_wdp(disc.instance, disc.cbc, disc.operator, disc.load, problem.y0, report.u, tol=wdp_tol)
    if not weak.passed:
        raise InvariantViolation(
            f"Dense solution violates the weak problem (residual {weak.max_residual:.3e})",
            {"wdp_residual": weak.max_residual},
        )
    values = report.u.reshape(steps + 1, problem.n)
    solution = DiscreteSolution(
        problem=problem, grid=disc.grid.nodes, values=values, theta=theta, scheme="derivation"
    )
    solution.diagnostics = compute_diagnostics(solution, disc=disc, boundary_tol=boundary_tol)
    solution.diagnostics.sigma_min = report.sigma_min
    return solution


def stacked_sigma_min(problem: EvolutionProblem, steps: int, theta: float = 1.0) -> float:
    """Smallest singular value of the weighted stacked system of the discretized instance."""
    disc = discretize(problem, steps, theta)
    return assemble_sdp(disc.instance, disc.cbc, disc.operator, disc.load, problem.y0).sigma_min


def discrete_stability(disc: Discretization) -> float:
    return stability_constant(disc.instance, disc.operator, disc.cbc, check_coercivity=False)


def energy_profile(solution: DiscreteSolution) -> np.ndarray:
    """``||u_k||_H`` along the grid."""
    return h_norms(solution.problem, solution.values)


def regularity_ratio(solution: DiscreteSolution, disc: t.Optional[Discretization] = None) -> t.Optional[float]:
    """``||D_h u||_{V'} / ||f_h||_{V'}``, or nothing when the forcing vanishes."""
    disc = disc or discretize(solution.problem, solution.steps, solution.theta)
    load = disc.load_norm()
    if load == 0.0:
        return None
    return disc.derivative_norm(solution.flat()) / load


def compute_diagnostics(
    solution: DiscreteSolution,
    disc: t.Optional[Discretization] = None,
    stability: t.Optional[bool] = None,
    boundary_tol: float = BOUNDARY_RESIDUAL_TOL,
) -> Diagnostics:
    """
    Residuals and norms of a grid solution. The stability constant needs the dense
    instance and is computed only up to a moderate dimension unless requested.

    A boundary residual above ``boundary_tol``, relative to the largest grid value,
    is an invariant violation.
    """
    problem = solution.problem
    disc = disc or discretize(problem, solution.steps, solution.theta)
    values = solution.values
    H = problem.triple.H

    boundary = values[0] - problem.phi_adjoint @ values[-1] - problem.y0
    boundary_residual = float(H.norm(boundary))
    if boundary_residual > boundary_tol * max(1.0, float(np.abs(values).max(initial=0.0))):
        raise InvariantViolation(
            f"Boundary residual {boundary_residual:.3e} exceeds tolerance {boundary_tol:.3e}",
            {"boundary_residual": boundary_residual},
        )

    left, right, forcing = _step_matrices(problem, disc.grid, solution.theta)
    residuals = np.einsum("kij,kj->ki", left, values[1:]) - np.einsum("kij,kj->ki", right, values[:-1]) - forcing
    triple = problem.triple
    scale = max(1.0, max(triple.dual_norm(f) for f in forcing))
    stepping_residual = max(triple.dual_norm(r) for r in residuals) / scale

    if stability is None:
        stability = disc.dim <= DENSE_LIMIT
    diagnostics = Diagnostics(
        boundary_residual=boundary_residual,
        stepping_residual=float(stepping_residual),
        w_norm=disc.w_norm(solution.flat()),
        propagator_norm=h_matrix_norm(problem, propagator(problem, solution.steps, solution.theta)),
        stability=discrete_stability(disc) if stability else None,
        regularity_ratio=regularity_ratio(solution, disc),
    )
    logger.debug(f"Diagnostics: {diagnostics}")
    return diagnostics
