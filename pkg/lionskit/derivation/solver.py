"""
Strong and weak derivation problems.

The strong problem asks for ``u`` in ``W`` with ``D u + A u = f`` and the
boundary condition ``B0 u - Phi* B1 u = y0``. Both equations are stacked into one
system, weighted so that rows and unknowns are measured in the norms of ``V``,
``H`` and ``W``, and solved in the least-squares sense. Uniqueness and
consistency of the solution are certified from the same factorization.
"""

import dataclasses
import logging
import math
import typing as t

import numpy as np
import scipy.linalg

from lionskit.derivation.boundary import ADMISSIBILITY_TOL, b_orthogonal, z_phi
from lionskit.derivation.model import ContractionBC, DerivationInstance
from lionskit.exceptions import ArgumentError, AssumptionError, InvariantViolation
from lionskit.hilbert import (
    RANK_TOL,
    LinearMap,
    Subspace,
    adjoint,
    coercivity_constant,
    smallest_gain,
)

logger = logging.getLogger(__name__)

SOLVER_RESIDUAL_TOL = 1e-9
WDP_RESIDUAL_TOL = 1e-8
STABILITY_FLOOR = 1e-12
MEMBERSHIP_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class StackedSystem:
    """
    The whitened stacked system ``M z = rhs`` with ``u = L_W^{-H} z``.

    The first ``equation_rows`` rows hold ``D u + A u = f``, the remaining ones the
    boundary condition tested against an orthonormal basis of ``ran B0``.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    equation_rows: int
    boundary_rows: int

    @property
    def sigma_min(self) -> float:
        if self.matrix.shape[1] == 0:
            return math.inf
        if self.matrix.shape[0] < self.matrix.shape[1]:
            return 0.0
        return float(scipy.linalg.svdvals(self.matrix)[-1])


def _check_operator(instance: DerivationInstance, op: LinearMap, check_coercivity: bool):
    if not (op.domain.same_as(instance.V) and op.codomain.same_as(instance.V)):
        raise ArgumentError("Operator A must map V into V")
    if check_coercivity:
        alpha = coercivity_constant(op)
        if not alpha > 0:
            raise AssumptionError(f"Operator A is not coercive (alpha = {alpha:.3e})", value=alpha)


def _graph_operator(instance: DerivationInstance, op: LinearMap) -> LinearMap:
    """``D + A`` as a map from ``W`` into ``V``."""
    return LinearMap(instance.W, instance.V, instance.D.coeffs + op.coeffs)


def assemble_sdp(instance: DerivationInstance, cbc: ContractionBC, op: LinearMap, f, y0) -> StackedSystem:
    bs = cbc.bs
    if not bs.W.same_as(instance.W):
        raise ArgumentError("Boundary condition and derivation live on different spaces")
    V, W, H = instance.V, instance.W, bs.H
    f = V.coerce(f)
    y0 = H.coerce(y0)
    gap = bs.ran_B0.distance(y0) if H.dim else 0.0
    if gap > MEMBERSHIP_TOL * max(1.0, H.norm(y0)):
        raise AssumptionError(f"Boundary datum y0 is not in the range of B0 (distance {gap:.3e})", witness=y0)

    graph = _graph_operator(instance, op)
    equation = V.whiten(graph.coeffs)
    rhs_equation = V.whiten(f)

    q0 = bs.ran_B0.basis
    condition = bs.B0.coeffs - adjoint(cbc.effective).coeffs @ bs.B1.coeffs
    boundary = q0.conj().T @ H.gram @ condition
    rhs_boundary = q0.conj().T @ H.gram @ y0

    stacked = np.vstack([equation, boundary]).astype(np.result_type(equation, boundary, W.dtype))
    matrix = W.cowhiten(stacked.conj().T).conj().T
    rhs = np.concatenate([rhs_equation, rhs_boundary])
    return StackedSystem(matrix=matrix, rhs=rhs, equation_rows=equation.shape[0], boundary_rows=boundary.shape[0])


@dataclasses.dataclass(frozen=True)
class SdpSolution:
    u: np.ndarray
    sigma_min: float
    residual: float


def solve_sdp(
    instance: DerivationInstance,
    cbc: ContractionBC,
    op: LinearMap,
    f,
    y0,
    check_coercivity: bool = True,
    tol: float = SOLVER_RESIDUAL_TOL,
) -> np.ndarray:
    """
    Solve ``D u + A u = f`` with ``B0 u - Phi* B1 u = y0``.
    """
    return solve_sdp_report(instance, cbc, op, f, y0, check_coercivity=check_coercivity, tol=tol).u


def solve_sdp_report(
    instance: DerivationInstance,
    cbc: ContractionBC,
    op: LinearMap,
    f,
    y0,
    check_coercivity: bool = True,
    tol: float = SOLVER_RESIDUAL_TOL,
) -> SdpSolution:
    _check_operator(instance, op, check_coercivity)
    system = assemble_sdp(instance, cbc, op, f, y0)
    logger.info(
        f"Solving strong derivation problem: dim W={instance.W.dim}, "
        f"rows={system.equation_rows}+{system.boundary_rows}"
    )
    matrix = system.matrix
    if matrix.shape[1] == 0:
        return SdpSolution(u=np.zeros(0, dtype=instance.W.dtype), sigma_min=math.inf, residual=0.0)

    u_svd, s, vh = scipy.linalg.svd(matrix, full_matrices=False)
    sigma_min = float(s[-1]) if matrix.shape[0] >= matrix.shape[1] else 0.0
    scale = max(1.0, float(s[0]))
    logger.debug(f"Stacked system: sigma_max={s[0]:.6e}, sigma_min={sigma_min:.6e}")
    if sigma_min <= RANK_TOL * scale:
        raise InvariantViolation(
            f"Stacked system is singular (smallest singular value {sigma_min:.3e})",
            {"sigma_min": sigma_min, "sigma_max": float(s[0])},
        )
    z = vh.conj().T @ ((u_svd.conj().T @ system.rhs) / s)
    residual = float(np.linalg.norm(matrix @ z - system.rhs))
    if residual > tol * max(1.0, float(np.linalg.norm(system.rhs))):
        raise InvariantViolation(
            f"Stacked system is inconsistent (residual {residual:.3e})",
            {"residual": residual, "sigma_min": sigma_min},
        )
    return SdpSolution(u=instance.W.unwhiten(z), sigma_min=sigma_min, residual=residual)


@dataclasses.dataclass(frozen=True)
class WdpReport:
    residuals: np.ndarray
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tol


def weak_residuals(instance: DerivationInstance, op: LinearMap, u, f, tests: np.ndarray) -> np.ndarray:
    """
    ``-conj(<D z, u>) + <A u, z> - <f, z>`` for each column ``z`` of ``tests``.
    """
    V = instance.V
    u = instance.W.coerce(u)
    f = V.coerce(f)
    derivative = tests.conj().T @ (instance.pairing.conj().T @ u)
    return -derivative + tests.conj().T @ (V.gram @ (op.coeffs @ u)) - tests.conj().T @ (V.gram @ f)


def verify_wdp(
    instance: DerivationInstance, cbc: ContractionBC, op: LinearMap, f, y0, u, tol: float = WDP_RESIDUAL_TOL
) -> WdpReport:
    """
    Test ``u`` against the weak formulation over a basis ``z`` of ``Z_Phi``::

        -conj(<D z, u>) + <A u, z> = <f, z> + <y0, B0 z>_H
    """
    bs = cbc.bs
    H = bs.H
    tests = z_phi(cbc).basis
    y0 = H.coerce(y0)
    residuals = weak_residuals(instance, op, u, f, tests) - bs.B0(tests).conj().T @ (H.gram @ y0)
    scale = max(
        1.0,
        instance.W.norm(u),
        instance.V.norm(f),
        H.norm(y0) if H.dim else 0.0,
    )
    residuals = np.abs(residuals) / scale
    max_residual = float(residuals.max(initial=0.0))
    logger.debug(f"Weak problem residual: {max_residual:.3e} over {tests.shape[1]} test vectors")
    return WdpReport(residuals=residuals, max_residual=max_residual, tol=tol)


@dataclasses.dataclass(frozen=True)
class WdpSolution:
    u: np.ndarray
    residual: float
    nullity: int

    @property
    def unique(self) -> bool:
        return self.nullity == 0


def solve_wdp(
    instance: DerivationInstance,
    subspace: Subspace,
    op: LinearMap,
    load,
    check_admissible: bool = True,
    tol: float = SOLVER_RESIDUAL_TOL,
    form_tol: float = ADMISSIBILITY_TOL,
) -> WdpSolution:
    """
    A solution of the weak problem tested against an admissible subspace ``Z``::

        -conj(<D z, u>) + <A u, z> = <L, z>    for all z in Z

    ``load`` is the Riesz representative of ``L``. The minimal-norm solution is
    returned, together with the dimension of the solution set.
    """
    _check_operator(instance, op, check_coercivity=False)
    W = instance.W
    if check_admissible and subspace.dim:
        m = subspace.basis.conj().T @ instance.form_matrix @ subspace.basis
        largest = float(scipy.linalg.eigvalsh((m + m.conj().T) / 2)[-1])
        if largest > form_tol * instance.form_scale():
            raise AssumptionError(f"Test space is not admissible (b(w, w) up to {largest:.3e})", value=largest)

    tests = subspace.basis
    rows = tests.conj().T @ (-instance.pairing.conj().T + instance.V.gram @ op.coeffs)
    rhs = tests.conj().T @ (instance.V.gram @ instance.V.coerce(load))
    matrix = W.cowhiten(rows.conj().T).conj().T
    if matrix.size == 0:
        return WdpSolution(u=np.zeros(W.dim, dtype=W.dtype), residual=0.0, nullity=W.dim)
    z, _, rank, _ = scipy.linalg.lstsq(matrix, rhs, cond=RANK_TOL)
    residual = float(np.linalg.norm(matrix @ z - rhs))
    if residual > tol * max(1.0, float(np.linalg.norm(rhs))):
        raise InvariantViolation(f"Weak problem has no solution (residual {residual:.3e})", {"residual": residual})
    return WdpSolution(u=W.unwhiten(z), residual=residual, nullity=W.dim - int(rank))


def stability_constant(
    instance: DerivationInstance, op: LinearMap, cbc: ContractionBC, check_coercivity: bool = True
) -> float:
    """
    ``beta'`` with ``||D u + A u||_{V'} >= beta' ||u||_W`` on the ``b``-orthogonal of ``Z_Phi``.
    """
    _check_operator(instance, op, check_coercivity)
    space = b_orthogonal(cbc.bs, z_phi(cbc))
    gain = smallest_gain(_graph_operator(instance, op).restrict(space))
    logger.debug(f"Stability constant {gain:.6e} on a space of dimension {space.dim}")
    if not gain > STABILITY_FLOOR:
        raise InvariantViolation(f"Stability constant vanishes ({gain:.3e})", {"stability": gain})
    return gain


def unconstrained_solve(instance: DerivationInstance, op: LinearMap, f) -> np.ndarray:
    """``(D + A)^{-1} f``, the solution when the boundary form vanishes identically."""
    return np.linalg.solve(instance.D.coeffs + op.coeffs, instance.V.coerce(f))

