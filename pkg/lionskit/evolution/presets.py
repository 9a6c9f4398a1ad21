"""
Coefficient families, forcings, boundary maps and ready-made problems.

Coefficients and solutions are small callable dataclasses rather than closures,
so presets have a readable ``repr`` and can be shared between worker threads.
"""

import dataclasses
import logging
import math
import typing as t

import numpy as np

from lionskit.evolution.model import EvolutionProblem, GelfandTriple, NonAutonomousForm
from lionskit.exceptions import ArgumentError
from lionskit.hilbert import InnerSpace, LinearMap, adjoint
from lionskit.util import random_array

logger = logging.getLogger(__name__)

CLAIM_SAMPLES = 257


@dataclasses.dataclass(frozen=True, eq=False)
class ConstantCoefficients:
    matrix: np.ndarray

    def __call__(self, time: float) -> np.ndarray:
        return self.matrix


@dataclasses.dataclass(frozen=True, eq=False)
class PolynomialCoefficients:
    """``A(t) = sum_j t^j C_j``."""

    coefficients: t.Tuple[np.ndarray, ...]

    def __call__(self, time: float) -> np.ndarray:
        result = np.zeros_like(self.coefficients[0])
        for coefficient in reversed(self.coefficients):
            result = result * time + coefficient
        return result


@dataclasses.dataclass(frozen=True, eq=False)
class TrigonometricCoefficients:
    """``A(t) = M + cos(2 pi nu t) C + sin(2 pi nu t) S``."""

    mean: np.ndarray
    cosine: np.ndarray
    sine: np.ndarray
    frequency: float = 1.0

    def __call__(self, time: float) -> np.ndarray:
        phase = 2 * math.pi * self.frequency * time
        return self.mean + math.cos(phase) * self.cosine + math.sin(phase) * self.sine


def _claims(evaluator, triple: GelfandTriple, horizon: float, samples: int = CLAIM_SAMPLES) -> t.Tuple[float, float]:
    sampled = NonAutonomousForm(evaluator=evaluator, alpha=0.0, bound_c=0.0)
    report = sampled.check(triple, np.linspace(0.0, horizon, samples))
    return report.alpha, report.bound


def constant_form(matrix, triple: GelfandTriple) -> NonAutonomousForm:
    evaluator = ConstantCoefficients(np.asarray(matrix))
    alpha, bound = _claims(evaluator, triple, 1.0, samples=1)
    return NonAutonomousForm(evaluator=evaluator, alpha=alpha, bound_c=bound, name="constant")


def polynomial_form(coefficients: t.Sequence, triple: GelfandTriple, horizon: float) -> NonAutonomousForm:
    """
    Claimed constants are estimated on a uniform sample of ``[0, T]``.
    """
    if not coefficients:
        raise ArgumentError("Polynomial coefficients must not be empty")
    evaluator = PolynomialCoefficients(tuple(np.asarray(c) for c in coefficients))
    alpha, bound = _claims(evaluator, triple, horizon)
    return NonAutonomousForm(evaluator=evaluator, alpha=alpha, bound_c=bound, name="polynomial")


def trigonometric_form(
    mean, cosine, sine, triple: GelfandTriple, horizon: float, frequency: float = 1.0
) -> NonAutonomousForm:
    evaluator = TrigonometricCoefficients(np.asarray(mean), np.asarray(cosine), np.asarray(sine), frequency)
    alpha, bound = _claims(evaluator, triple, horizon)
    return NonAutonomousForm(evaluator=evaluator, alpha=alpha, bound_c=bound, name="trigonometric")


@dataclasses.dataclass(frozen=True, eq=False)
class ConstantSolution:
    value: np.ndarray

    def __call__(self, time: float) -> np.ndarray:
        return self.value

    def derivative(self, time: float) -> np.ndarray:
        return np.zeros_like(self.value)


@dataclasses.dataclass(frozen=True, eq=False)
class ExponentialSolution:
    """``u(t) = a exp(-rate t)``."""

    amplitude: np.ndarray
    rate: float = 1.0

    def __call__(self, time: float) -> np.ndarray:
        return self.amplitude * math.exp(-self.rate * time)

    def derivative(self, time: float) -> np.ndarray:
        return -self.rate * self(time)


@dataclasses.dataclass(frozen=True, eq=False)
class TrigonometricSolution:
    """``u(t) = c cos(2 pi nu t) + s sin(2 pi nu t)``."""

    cosine: np.ndarray
    sine: np.ndarray
    frequency: float = 1.0

    def __call__(self, time: float) -> np.ndarray:
        phase = 2 * math.pi * self.frequency * time
        return self.cosine * math.cos(phase) + self.sine * math.sin(phase)

    def derivative(self, time: float) -> np.ndarray:
        omega = 2 * math.pi * self.frequency
        phase = omega * time
        return omega * (self.sine * math.cos(phase) - self.cosine * math.sin(phase))


@dataclasses.dataclass(frozen=True, eq=False)
class ZeroForcing:
    n: int

    def __call__(self, time: float) -> np.ndarray:
        return np.zeros(self.n)


@dataclasses.dataclass(frozen=True, eq=False)
class ConstantForcing:
    value: np.ndarray

    def __call__(self, time: float) -> np.ndarray:
        return self.value


@dataclasses.dataclass(frozen=True, eq=False)
class TrigonometricForcing:
    cosine: np.ndarray
    sine: np.ndarray
    frequency: float = 1.0

    def __call__(self, time: float) -> np.ndarray:
        phase = 2 * math.pi * self.frequency * time
        return self.cosine * math.cos(phase) + self.sine * math.sin(phase)


@dataclasses.dataclass(frozen=True, eq=False)
class ManufacturedForcing:
    """``f = G_H u' + A(t) u`` for a known solution ``u``."""

    gram_H: np.ndarray
    form: NonAutonomousForm
    solution: t.Any

    def __call__(self, time: float) -> np.ndarray:
        return self.gram_H @ self.solution.derivative(time) + self.form(time) @ self.solution(time)


def rotation(angle: float) -> np.ndarray:
    return np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])


def boundary_map(
    kind: str,
    triple: GelfandTriple,
    scale: float = 1.0,
    angle: float = 0.0,
    matrix: t.Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Boundary maps by name: ``initial`` (0), ``periodic`` (Id), ``antiperiodic`` (-Id),
    ``scaled-rotation`` and ``explicit``.

    ``scaled-rotation`` is ``c R(angle)`` on consecutive coordinate pairs of an
    ``H``-orthonormal basis, and ``c`` on a trailing unpaired coordinate.
    """
    n = triple.n
    if kind == "initial":
        return np.zeros((n, n))
    if kind == "periodic":
        return np.eye(n)
    if kind == "antiperiodic":
        return -np.eye(n)
    if kind == "scaled-rotation":
        whitened = np.zeros((n, n))
        for start in range(0, n - 1, 2):
            whitened[start : start + 2, start : start + 2] = rotation(angle)
        if n % 2:
            whitened[-1, -1] = 1.0
        return np.array(LinearMap.from_whitened(triple.H, triple.H, scale * whitened).coeffs)
    if kind == "explicit":
        if matrix is None:
            raise ArgumentError("Explicit boundary map requires a matrix")
        return np.asarray(matrix)
    raise ArgumentError(f"Unknown boundary map: {kind}")


def manufacture(
    triple: GelfandTriple,
    form: NonAutonomousForm,
    solution,
    phi: np.ndarray,
    horizon: float,
    name: str = "manufactured",
) -> EvolutionProblem:
    """
    Problem whose exact solution is ``solution``: ``f = G_H u' + A u`` and ``y0 = u(0) - Phi* u(T)``.
    """
    phi_adjoint = adjoint(LinearMap(triple.H, triple.H, phi)).coeffs
    y0 = solution(0.0) - phi_adjoint @ solution(horizon)
    return EvolutionProblem(
        triple=triple,
        form=form,
        forcing=ManufacturedForcing(triple.gram_H, form, solution),
        horizon=horizon,
        phi=phi,
        y0=y0,
        exact=solution,
        name=name,
    )


def decay_problem() -> EvolutionProblem:
    """``u' + u = 0``, ``u(0) = 1`` on ``(0, 1)``; ``u(t) = exp(-t)``."""
    triple = GelfandTriple.euclidean(1)
    return EvolutionProblem(
        triple=triple,
        form=constant_form([[1.0]], triple),
        forcing=ZeroForcing(1),
        horizon=1.0,
        phi=boundary_map("initial", triple),
        y0=np.array([1.0]),
        exact=ExponentialSolution(np.array([1.0])),
        name="decay",
    )


def forced_periodic_problem() -> EvolutionProblem:
    """``u' + u = cos(2 pi t)`` with ``u(0) = u(1)``."""
    triple = GelfandTriple.euclidean(1)
    denominator = 1 + 4 * math.pi**2
    return EvolutionProblem(
        triple=triple,
        form=constant_form([[1.0]], triple),
        forcing=TrigonometricForcing(cosine=np.array([1.0]), sine=np.array([0.0])),
        horizon=1.0,
        phi=boundary_map("periodic", triple),
        y0=np.array([0.0]),
        exact=TrigonometricSolution(
            cosine=np.array([1.0 / denominator]), sine=np.array([2 * math.pi / denominator])
        ),
        name="forced-periodic",
    )


def rotation_problem() -> EvolutionProblem:
    """
    ``u = (sin 2 pi t, cos 2 pi t)`` with ``A(t) = (2 + sin 2 pi t) Id`` and ``Phi = R(pi/4) / 2``.
    """
    triple = GelfandTriple.euclidean(2)
    identity = np.eye(2)
    form = trigonometric_form(2 * identity, np.zeros((2, 2)), identity, triple, horizon=1.0)
    solution = TrigonometricSolution(cosine=np.array([0.0, 1.0]), sine=np.array([1.0, 0.0]))
    phi = boundary_map("scaled-rotation", triple, scale=0.5, angle=math.pi / 4)
    return manufacture(triple, form, solution, phi, horizon=1.0, name="rotation")


def constant_problem() -> EvolutionProblem:
    """Constant solution with constant coefficients; every scheme reproduces it exactly."""
    triple = GelfandTriple.euclidean(2)
    form = constant_form([[2.0, 1.0], [0.0, 2.0]], triple)
    solution = ConstantSolution(np.array([1.0, -0.5]))
    phi = 0.5 * np.eye(2)
    return manufacture(triple, form, solution, phi, horizon=1.0, name="constant")


PRESETS: t.Dict[str, t.Callable[[], EvolutionProblem]] = {
    "decay": decay_problem,
    "forced-periodic": forced_periodic_problem,
    "rotation": rotation_problem,
    "constant": constant_problem,
}


def preset_problem(name: str) -> EvolutionProblem:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ArgumentError(f"Unknown problem preset: {name}") from None


def _from_whitened_form(space: InnerSpace, matrix: np.ndarray) -> np.ndarray:
    """Form coefficients ``L M L^H`` whose whitened matrix is ``M``."""
    return space.uncowhiten(space.uncowhiten(matrix).conj().T).conj().T


def random_problem(
    rng: np.random.Generator,
    n: int,
    horizon: float = 1.0,
    alpha: float = 1.0,
    zero_datum: bool = False,
    phi_norm: t.Optional[float] = None,
) -> EvolutionProblem:
    """
    Random weighted triple, non-autonomous coercive form, contraction and forcing.

    The time-dependent parts of the form are scaled so that the form stays
    coercive with constant ``alpha / 2``.
    """
    U = InnerSpace.random(rng, n)
    H = InnerSpace.random(rng, n)
    triple = GelfandTriple(gram_U=U.gram, gram_H=H.gram)

    def perturbation(size: float) -> np.ndarray:
        matrix = random_array(rng, (n, n))
        return size * matrix / np.linalg.norm(matrix, 2)

    k = random_array(rng, (n, n))
    p = random_array(rng, (n, n))
    mean = (k - k.T) / 2 + p @ p.T / n + alpha * np.eye(n)
    cosine = perturbation(alpha / 4)
    sine = perturbation(alpha / 4)
    form = trigonometric_form(
        _from_whitened_form(triple.U, mean),
        _from_whitened_form(triple.U, cosine),
        _from_whitened_form(triple.U, sine),
        triple,
        horizon,
        frequency=1.0 / horizon,
    )

    core = random_array(rng, (n, n))
    target = rng.uniform(0.2, 1.0) if phi_norm is None else phi_norm
    core = target * core / np.linalg.norm(core, 2)
    phi = np.array(LinearMap.from_whitened(triple.H, triple.H, core).coeffs)

    forcing = TrigonometricForcing(
        cosine=random_array(rng, (n,)), sine=random_array(rng, (n,)), frequency=1.0 / horizon
    )
    y0 = np.zeros(n) if zero_datum else random_array(rng, (n,))
    return EvolutionProblem(
        triple=triple, form=form, forcing=forcing, horizon=horizon, phi=phi, y0=y0, name="random"
    )
