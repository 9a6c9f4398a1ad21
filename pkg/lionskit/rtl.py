"""
Finite-dimensional oracles for the representation theorems and the
perturbation estimate for coercive-minus-dissipative operators.
"""

import dataclasses
import logging
import math
import typing as t

import numpy as np
import scipy.linalg
import scipy.optimize

from lionskit.exceptions import ArgumentError, AssumptionError, InvariantViolation
from lionskit.hilbert import (
    InnerSpace,
    LinearMap,
    Subspace,
    adjoint,
    coercivity_constant,
    dissipativity_margin,
    hermitian_part,
    min_norm_solve,
    near_kernel_direction,
    skew_part,
    smallest_gain,
    sqrt_psd_pinv,
)
from lionskit.util import make_rng, random_array

logger = logging.getLogger(__name__)

DISSIPATIVITY_TOL = 1e-10
RATIO_SLACK = 1e-10
FORM_COERCIVITY_TOL = 1e-10
FORM_RESIDUAL_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class Witness:
    functional: np.ndarray
    witness: np.ndarray
    norm_ratio: float
    residual: float


@dataclasses.dataclass(frozen=True)
class DualWitnessReport:
    """
    Outcome of the operator representation check.

    ``norm_ratio`` of every witness is ``||y*|| / ||x*||``. When ``beta`` is zero
    there is no uniform lower bound; ``kernel_direction`` then holds a unit vector
    with ``T x ~ 0`` and ``unreachable_residual`` shows that its functional has no
    witness at all.
    """

    beta: float
    witnesses: t.List[Witness]
    max_ratio: float
    bounded: bool
    kernel_direction: t.Optional[np.ndarray] = None
    unreachable_residual: t.Optional[float] = None

    @property
    def normalized_max_ratio(self) -> float:
        return self.max_ratio * self.beta

    @property
    def passed(self) -> bool:
        if not self.bounded:
            return self.kernel_direction is not None and (self.unreachable_residual or 0.0) > 0.5
        return self.max_ratio <= (1.0 / self.beta) * (1.0 + RATIO_SLACK)


def minimal_witness(op: LinearMap, functional: np.ndarray) -> t.Tuple[np.ndarray, float]:
    """
    Minimal-norm representative ``y`` on the codomain with ``T* y = functional``.

    ``functional`` is the Riesz representative of ``x*`` on the domain. Returns the
    witness and the residual of the equation, which vanishes iff a witness exists.
    """
    return min_norm_solve(adjoint(op), functional)


def verify_operator_rtl(
    op: LinearMap, trials: int = 20, seed: t.Union[int, np.random.Generator, None] = None, tol: float = 1e-10
) -> DualWitnessReport:
    rng = make_rng(seed)
    beta = smallest_gain(op)
    scale = max(1.0, op.operator_norm())
    if beta <= tol * scale:
        direction = near_kernel_direction(op)
        _, residual = minimal_witness(op, direction)
        logger.debug(f"No uniform lower bound: gain={beta:.3e}, unreachable residual={residual:.3e}")
        return DualWitnessReport(
            beta=0.0,
            witnesses=[],
            max_ratio=math.inf,
            bounded=False,
            kernel_direction=direction,
            unreachable_residual=residual,
        )

    witnesses = []
    functionals = op.domain.random_vector(rng, trials)
    for index in range(trials):
        functional = functionals[:, index]
        witness, residual = minimal_witness(op, functional)
        ratio = op.codomain.norm(witness) / op.domain.norm(functional)
        witnesses.append(Witness(functional=functional, witness=witness, norm_ratio=ratio, residual=residual))
    max_ratio = max((w.norm_ratio for w in witnesses), default=0.0)
    return DualWitnessReport(beta=beta, witnesses=witnesses, max_ratio=max_ratio, bounded=True)


def form_coercivity_on(a_coeffs: np.ndarray, subspace: Subspace, samples: int = 361) -> float:
    """
    ``min |a(y, y)| / ||y||^2`` over ``y`` in the subspace, with ``a(x, y) = y^H a_coeffs x``.

    This is the distance of the numerical range of the restricted form from the
    origin, obtained from the smallest eigenvalue of ``cos(s) H1 + sin(s) H2`` where
    ``H1``, ``H2`` are the two Hermitian parts, maximized over the angle ``s``.
    """
    if subspace.dim == 0:
        return math.inf
    q = subspace.basis
    m = q.conj().T @ np.asarray(a_coeffs) @ q
    h1 = (m + m.conj().T) / 2
    h2 = (m - m.conj().T) / 2j

    def lowest(angle: float) -> float:
        return float(scipy.linalg.eigvalsh(math.cos(angle) * h1 + math.sin(angle) * h2)[0])

    angles = np.linspace(-math.pi, math.pi, samples)
    values = np.array([lowest(a) for a in angles])
    best = int(np.argmax(values))
    step = angles[1] - angles[0]
    refined = scipy.optimize.minimize_scalar(
        lambda a: -lowest(a), bounds=(angles[best] - step, angles[best] + step), method="bounded"
    )
    return max(0.0, float(values[best]), float(-refined.fun))


def solve_form_problem(
    a_coeffs: np.ndarray,
    space: InnerSpace,
    subspace: Subspace,
    load: np.ndarray,
    tol: float = FORM_COERCIVITY_TOL,
) -> np.ndarray:
    """
    Find ``x`` in ``space`` with ``a(x, y) = <load, y>`` for every ``y`` in ``subspace``.

    ``a(x, y) = y^H a_coeffs x``; the right-hand side is given by its Riesz
    representative ``load``. When the solution is not unique, the one of minimal
    norm is returned.
    """
    a_coeffs = np.asarray(a_coeffs)
    if a_coeffs.shape != (space.dim, space.dim):
        raise ArgumentError(f"Form coefficients of shape {a_coeffs.shape} do not fit dimension {space.dim}")
    if not subspace.ambient.same_as(space):
        raise ArgumentError("Test space does not live in the trial space")
    beta = form_coercivity_on(a_coeffs, subspace)
    if beta < tol:
        raise AssumptionError(f"Form is not coercive on the test space (|a(y,y)| >= {beta:.3e} ||y||^2)", value=beta)

    q = subspace.basis
    coordinates = InnerSpace.euclidean(subspace.dim, complex_=space.is_complex)
    system = LinearMap(space, coordinates, q.conj().T @ a_coeffs)
    rhs = space.inner(load, q)
    solution, residual = min_norm_solve(system, rhs)
    if residual > FORM_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(rhs))):
        raise InvariantViolation(f"Form problem residual {residual:.3e} exceeds tolerance", {"residual": residual})
    return solution


@dataclasses.dataclass(frozen=True)
class ResolventSample:
    t: float
    gain: float
    resolvent_norm: float
    bounded: bool


@dataclasses.dataclass(frozen=True)
class DissipativityReport:
    """
    Direct dissipativity versus the dual resolvent bound ``||(I - t B*) x|| >= ||x||``.
    """

    margin: float
    dissipative: bool
    samples: t.List[ResolventSample]
    witness_t: t.Optional[float]
    agree: bool

    @property
    def dual_holds(self) -> bool:
        return all(p.bounded for p in self.samples)


def check_dissipative_dual(op: LinearMap, ts: t.Sequence[float], tol: float = DISSIPATIVITY_TOL) -> DissipativityReport:
    if not ts:
        raise ArgumentError("At least one value of t is required")
    if any(value <= 0 for value in ts):
        raise ArgumentError("All values of t must be positive")
    if not op.is_endomorphism:
        raise ArgumentError("Dissipativity requires a map of a space into itself")

    margin, direction = dissipativity_margin(op)
    dissipative = margin <= tol
    op_adjoint = adjoint(op)
    identity = LinearMap.identity(op.domain)

    sample_ts = list(ts)
    witness_t = None
    if not dissipative:
        image = op.domain.norm(op_adjoint(direction))
        if image > 0:
            witness_t = margin / image**2
            sample_ts.append(witness_t)

    samples = []
    for value in sample_ts:
        gain = smallest_gain(identity - value * op_adjoint)
        bounded = gain >= 1.0 - tol * max(1.0, value)
        samples.append(
            ResolventSample(t=value, gain=gain, resolvent_norm=1.0 / gain if gain > 0 else math.inf, bounded=bounded)
        )
    agree = dissipative == all(p.bounded for p in samples)
    if not agree:
        logger.warning(f"Dissipativity and dual resolvent bound disagree: margin={margin:.3e}")
    return DissipativityReport(
        margin=margin, dissipative=dissipative, samples=samples, witness_t=witness_t, agree=agree
    )


@dataclasses.dataclass(frozen=True)
class PerturbationConstant:
    alpha: float
    a_plus_norm: float
    cross_norm: float
    beta: float
    degenerate: bool

    @property
    def beta_squared(self) -> float:
        return self.beta**2

    @property
    def sum_form_beta(self) -> float:
        return sum_form_constant(self.beta)


def sum_form_constant(beta: float) -> float:
    """
    Constant for ``||(A - B) v|| >= c (||v|| + ||B v||)``, from ``(a + b)^2 <= 2 (a^2 + b^2)``.
    """
    return beta / math.sqrt(2.0)


def perturbation_beta(op: LinearMap, tol: float = 1e-12) -> PerturbationConstant:
    """
    Explicit constant with ``||(A - B) v||^2 >= beta^2 (||v||^2 + ||B v||^2)`` for every dissipative ``B``.

    With ``S`` the square root of the Hermitian part ``A+``::

        beta^2 = min(alpha^2 / 2, alpha^2 / (alpha + 2 ||S^-1 A-||^2) / ||A+||)

    When the skew part vanishes the cross term drops out and
    ``beta^2 = min(alpha^2, alpha / ||A+||)``.
    """
    alpha = coercivity_constant(op)
    if not alpha > 0:
        raise AssumptionError(f"Operator is not coercive (alpha = {alpha:.3e})", value=alpha)
    a_plus = hermitian_part(op)
    a_minus = skew_part(op)
    _, s_inverse = sqrt_psd_pinv(a_plus)
    cross = (s_inverse @ a_minus).operator_norm()
    a_plus_norm = a_plus.operator_norm()
    degenerate = cross <= tol * max(1.0, a_plus_norm)
    if degenerate:
        beta_squared = min(alpha**2, alpha / a_plus_norm)
    else:
        beta_squared = min(alpha**2 / 2.0, alpha**2 / (alpha + 2.0 * cross**2) / a_plus_norm)
    logger.debug(f"Perturbation constant: alpha={alpha:.6g}, |A+|={a_plus_norm:.6g}, cross={cross:.6g}")
    return PerturbationConstant(
        alpha=alpha, a_plus_norm=a_plus_norm, cross_norm=cross, beta=math.sqrt(beta_squared), degenerate=degenerate
    )


@dataclasses.dataclass(frozen=True)
class PerturbationReport:
    beta: float
    trials: int
    worst_slack: float
    worst_sum_slack: float
    violation: t.Optional[np.ndarray] = None

    @property
    def passed(self) -> bool:
        return self.worst_slack >= -RATIO_SLACK and self.worst_sum_slack >= -RATIO_SLACK


def verify_perturbation(
    op_a: LinearMap,
    op_b: LinearMap,
    beta: float,
    trials: int = 100,
    seed: t.Union[int, np.random.Generator, None] = None,
    tol: float = DISSIPATIVITY_TOL,
) -> PerturbationReport:
    """
    Sample ``||(A - B) v||^2 >= beta^2 (||v||^2 + ||B v||^2)`` and its sum form.
    """
    if not (op_a.is_endomorphism and op_b.is_endomorphism and op_a.domain.same_as(op_b.domain)):
        raise ArgumentError("Both operators must act on the same space")
    alpha = coercivity_constant(op_a)
    if not alpha > 0:
        raise AssumptionError(f"Operator A is not coercive (alpha = {alpha:.3e})", value=alpha)
    margin, direction = dissipativity_margin(op_b)
    if margin > tol:
        raise AssumptionError(
            f"Operator B is not dissipative (Re<Bx,x> = {margin:.3e})", witness=direction, value=margin
        )

    rng = make_rng(seed)
    space = op_a.domain
    difference = op_a - op_b
    vectors = space.random_vector(rng, trials)
    lhs = space.norms(difference(vectors))
    v_norms = space.norms(vectors)
    b_norms = space.norms(op_b(vectors))
    rhs = beta**2 * (v_norms**2 + b_norms**2)
    slack = (lhs**2 - rhs) / np.maximum(rhs, np.finfo(float).tiny)
    sum_rhs = sum_form_constant(beta) * (v_norms + b_norms)
    sum_slack = (lhs - sum_rhs) / np.maximum(sum_rhs, np.finfo(float).tiny)
    worst = int(np.argmin(slack))
    report = PerturbationReport(
        beta=beta,
        trials=trials,
        worst_slack=float(slack[worst]),
        worst_sum_slack=float(sum_slack.min()),
        violation=vectors[:, worst] if slack[worst] < -RATIO_SLACK else None,
    )
    return report


def random_dissipative(
    rng: np.random.Generator, space: InnerSpace, strict: float = 0.0, rank: t.Optional[int] = None
) -> LinearMap:
    """
    Skew-adjoint part plus a negative semidefinite part, built in whitened coordinates.

    ``strict > 0`` shifts by ``-strict``, making ``Re <B x, x> <= -strict ||x||^2``.
    """
    n = space.dim
    complex_ = space.is_complex
    k = random_array(rng, (n, n), complex_)
    skew = (k - k.conj().T) / 2
    rank = n if rank is None else rank
    p = random_array(rng, (n, rank), complex_)
    matrix = skew - p @ p.conj().T / max(1, rank) - strict * np.eye(n)
    return LinearMap.from_whitened(space, space, matrix)


def random_coercive(rng: np.random.Generator, space: InnerSpace, alpha: float = 1.0, skew: float = 1.0) -> LinearMap:
    """
    Random operator with ``Re <A v, v> >= alpha ||v||^2``.
    """
    n = space.dim
    complex_ = space.is_complex
    k = random_array(rng, (n, n), complex_)
    p = random_array(rng, (n, n), complex_)
    matrix = skew * (k - k.conj().T) / 2 + p @ p.conj().T / n + alpha * np.eye(n)
    return LinearMap.from_whitened(space, space, matrix)
