"""
Time discretization as an exact finite-dimensional derivation.

Grid functions ``u = (u_0, ..., u_N)`` form ``V_h`` with the trapezoid-weighted
norm ``sum_k w_k dt ||u_k||_U^2``. The derivation is tested against averages of
neighbouring nodes::

    <D_h u, w> = sum_k ((w_k + w_{k+1}) / 2)^H G_H (u_{k+1} - u_k)

so the boundary form telescopes to ``<u_N, w_N>_H - <u_0, w_0>_H``. The form
``a(t)`` and the forcing are evaluated at ``t_{k+theta}`` and tested the same
way, which makes ``D_h u + A_h u = f_h`` equivalent to the theta-scheme.
"""

import dataclasses
import functools
import logging
import typing as t

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from lionskit.derivation import BoundaryStructure, ContractionBC, DerivationInstance
from lionskit.evolution.model import EvolutionProblem
from lionskit.exceptions import ArgumentError
from lionskit.hilbert import InnerSpace, LinearMap
from lionskit.util import make_rng

logger = logging.getLogger(__name__)

IBP_TOL = 1e-13


def check_theta(theta: float):
    if not 0.5 <= theta <= 1.0:
        raise ArgumentError(f"Theta must lie in [1/2, 1], got {theta}")


def check_steps(steps: int):
    if steps < 2:
        raise ArgumentError(f"At least two time steps are required, got {steps}")


@dataclasses.dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def stage_times(self, theta: float) -> np.ndarray:
        return self.nodes[:-1] + theta * self.dt

    def weights(self) -> np.ndarray:
        """Trapezoid weights, including ``dt``."""
        weights = np.full(self.steps + 1, self.dt)
        weights[[0, -1]] /= 2
        return weights


def averaging(steps: int) -> sp.csr_matrix:
    """Nodes from intervals: node ``k`` receives half of intervals ``k - 1`` and ``k``."""
    half = np.full(steps, 0.5)
    return sp.diags([half, half], [0, -1], shape=(steps + 1, steps), format="csr")


def difference(steps: int) -> sp.csr_matrix:
    ones = np.ones(steps)
    return sp.diags([-ones, ones], [0, 1], shape=(steps, steps + 1), format="csr")


def blend(steps: int, theta: float) -> sp.csr_matrix:
    """Interval values ``theta u_{k+1} + (1 - theta) u_k``."""
    return sp.diags(
        [np.full(steps, 1.0 - theta), np.full(steps, theta)], [0, 1], shape=(steps, steps + 1), format="csr"
    )


def stage_data(problem: EvolutionProblem, grid: TimeGrid, theta: float) -> t.Tuple[np.ndarray, np.ndarray]:
    """
    Form matrices and forcing vectors at ``t_{k+theta}``, shapes ``(N, n, n)`` and ``(N, n)``.
    """
    times = grid.stage_times(theta)
    forms = np.array([problem.form(time) for time in times])
    forcing = np.array([np.atleast_1d(problem.forcing(time)) for time in times])
    return forms, forcing


@dataclasses.dataclass(frozen=True, eq=False)
class Discretization:
    """
    Sparse pieces of the discrete derivation problem. The dense
    :class:`DerivationInstance` and its boundary structure are built on demand.
    """

    problem: EvolutionProblem
    grid: TimeGrid
    theta: float
    gram_V: sp.csr_matrix
    pairing: sp.csr_matrix
    operator_pairing: sp.csr_matrix
    load_pairing: np.ndarray

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def dim(self) -> int:
        return (self.grid.steps + 1) * self.n

    @functools.cached_property
    def _gram_V_inverse(self) -> sp.csr_matrix:
        inverse_u = np.linalg.inv(self.problem.triple.gram_U)
        return sp.kron(sp.diags(1.0 / self.grid.weights()), inverse_u, format="csr")

    def v_norm(self, u) -> float:
        u = np.asarray(u)
        return float(np.sqrt(abs(np.vdot(u, self.gram_V @ u))))

    def v_dual_norm(self, g) -> float:
        """``V'`` norm of the coefficient functional ``u -> u^H g``."""
        g = np.asarray(g)
        return float(np.sqrt(abs(np.vdot(g, self._gram_V_inverse @ g))))

    def derivative_norm(self, u) -> float:
        """``||D_h u||_{V'}``."""
        return self.v_dual_norm(self.pairing @ np.asarray(u))

    def w_norm(self, u) -> float:
        return float(np.hypot(self.v_norm(u), self.derivative_norm(u)))

    def load_norm(self) -> float:
        return self.v_dual_norm(self.load_pairing)

    @functools.cached_property
    def V(self) -> InnerSpace:
        triple = self.problem.triple
        return InnerSpace(gram=self.gram_V.toarray(), scalar_field=triple.U.scalar_field)

    @functools.cached_property
    def instance(self) -> DerivationInstance:
        n = self.n
        interior = np.eye(self.dim)[:, n : self.dim - n]
        return DerivationInstance.create(self.V, self.pairing.toarray(), test_vectors=interior)

    @functools.cached_property
    def structure(self) -> BoundaryStructure:
        """Endpoint evaluations ``B0 u = u_0`` and ``B1 u = u_N`` into ``H``."""
        n = self.n
        H = self.problem.triple.H
        b0 = np.zeros((n, self.dim))
        b1 = np.zeros((n, self.dim))
        b0[:, :n] = np.eye(n)
        b1[:, -n:] = np.eye(n)
        W = self.instance.W
        return BoundaryStructure(H=H, B0=LinearMap(W, H, b0), B1=LinearMap(W, H, b1))

    @functools.cached_property
    def cbc(self) -> ContractionBC:
        return ContractionBC(bs=self.structure, phi=self.problem.phi_map)

    @functools.cached_property
    def operator(self) -> LinearMap:
        """Riesz representative ``A_h = G_V^{-1} (tested form)``."""
        return LinearMap(self.V, self.V, self.V.riesz(self.operator_pairing.toarray()))

    @functools.cached_property
    def load(self) -> np.ndarray:
        return self.V.riesz(self.load_pairing)


def discretize(problem: EvolutionProblem, steps: int, theta: float = 1.0) -> Discretization:
    check_steps(steps)
    check_theta(theta)
    grid = TimeGrid(problem.horizon, steps)
    triple = problem.triple
    n = problem.n
    identity = sp.identity(n, format="csr")

    gram_v = sp.kron(sp.diags(grid.weights()), triple.gram_U, format="csr")
    pairing = sp.kron(averaging(steps) @ difference(steps), triple.gram_H, format="csr")

    forms, forcing = stage_data(problem, grid, theta)
    stage_forms = sp.block_diag([grid.dt * form for form in forms], format="csr")
    tested = sp.kron(averaging(steps), identity, format="csr")
    operator_pairing = tested @ stage_forms @ sp.kron(blend(steps, theta), identity, format="csr")
    load_pairing = tested @ (grid.dt * forcing.reshape(-1))

    logger.debug(f"Discretized {problem} with N={steps}, theta={theta}: dimension {(steps + 1) * n}")
    return Discretization(
        problem=problem,
        grid=grid,
        theta=theta,
        gram_V=gram_v,
        pairing=pairing.tocsr(),
        operator_pairing=operator_pairing.tocsr(),
        load_pairing=np.asarray(load_pairing),
    )


@dataclasses.dataclass(frozen=True)
class IbpReport:
    trials: int
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def discrete_ibp_check(
    disc: Discretization,
    trials: int = 100,
    seed: t.Union[int, np.random.Generator, None] = None,
    tol: float = IBP_TOL,
) -> IbpReport:
    """
    ``<D_h v, w> + conj(<D_h w, v>) = <v_N, w_N>_H - <v_0, w_0>_H`` on random pairs.

    Residuals are relative to the sum of the magnitudes of all terms.
    """
    rng = make_rng(seed)
    gram_h = disc.problem.triple.gram_H
    complex_ = disc.problem.triple.is_complex
    n = disc.n
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(disc.dim) + (1j * rng.standard_normal(disc.dim) if complex_ else 0.0)
        w = rng.standard_normal(disc.dim) + (1j * rng.standard_normal(disc.dim) if complex_ else 0.0)
        lhs_a = np.vdot(w, disc.pairing @ v)
        lhs_b = np.conj(np.vdot(v, disc.pairing @ w))
        final = np.vdot(w[-n:], gram_h @ v[-n:])
        initial = np.vdot(w[:n], gram_h @ v[:n])
        scale = max(1.0, abs(lhs_a) + abs(lhs_b) + abs(final) + abs(initial))
        worst = max(worst, abs(lhs_a + lhs_b - final + initial) / scale)
    logger.debug(f"Discrete integration by parts: worst relative residual {worst:.3e} over {trials} pairs")
    return IbpReport(trials=trials, max_residual=worst, tol=tol)


def h_norms(problem: EvolutionProblem, values: np.ndarray) -> np.ndarray:
    """``||u_k||_H`` for every node."""
    whitened = problem.triple.H.whiten(np.asarray(values).T)
    return np.linalg.norm(whitened, axis=0)


def h_matrix_norm(problem: EvolutionProblem, matrix: np.ndarray) -> float:
    """Operator norm of a state map in ``H``."""
    H = problem.triple.H
    return float(scipy.linalg.svdvals(LinearMap(H, H, matrix).whitened())[0])
