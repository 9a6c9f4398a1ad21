import dataclasses
import functools
import logging
import typing as t

import numpy as np
import scipy.linalg

from lionskit.exceptions import ArgumentError, AssumptionError
from lionskit.hilbert import GRAM_SYMMETRY_TOL, InnerSpace, LinearMap, ScalarField

logger = logging.getLogger(__name__)

COERCIVITY_TOL = 1e-10
CONTRACTION_TOL = 1e-12

Evaluator = t.Callable[[float], np.ndarray]


@dataclasses.dataclass(frozen=True, eq=False)
class GelfandTriple:
    """
    State space ``R^n`` (or ``C^n``) with the norms of ``U`` and of the pivot space ``H``.

    The antidual ``U'`` is identified through ``H``: a vector ``g`` in ``U'``
    coordinates acts as ``u -> u^H g``, which is ``<g, u>_H`` whenever ``g = G_H h``.
    """

    gram_U: np.ndarray
    gram_H: np.ndarray
    symmetry_tol: float = dataclasses.field(default=GRAM_SYMMETRY_TOL, repr=False)
    U: InnerSpace = dataclasses.field(init=False, repr=False)
    H: InnerSpace = dataclasses.field(init=False, repr=False)

    def __post_init__(self):
        gram_u = np.asarray(self.gram_U)
        gram_h = np.asarray(self.gram_H)
        if gram_u.shape != gram_h.shape:
            raise ArgumentError(f"Gram arrays of U and H differ in shape: {gram_u.shape} vs. {gram_h.shape}")
        field = ScalarField.COMPLEX if np.iscomplexobj(gram_u) or np.iscomplexobj(gram_h) else ScalarField.REAL
        object.__setattr__(self, "U", InnerSpace(gram=gram_u, scalar_field=field, symmetry_tol=self.symmetry_tol))
        object.__setattr__(self, "H", InnerSpace(gram=gram_h, scalar_field=field, symmetry_tol=self.symmetry_tol))
        object.__setattr__(self, "gram_U", self.U.gram)
        object.__setattr__(self, "gram_H", self.H.gram)

    @classmethod
    def euclidean(cls, n: int) -> "GelfandTriple":
        return cls(gram_U=np.eye(n), gram_H=np.eye(n))

    @property
    def n(self) -> int:
        return self.U.dim

    @property
    def is_complex(self) -> bool:
        return self.U.is_complex

    @functools.cached_property
    def embed_const(self) -> float:
        """Smallest ``c`` with ``||x||_H <= c ||x||_U``."""
        largest = scipy.linalg.eigh(self.gram_H, self.gram_U, eigvals_only=True)[-1]
        return float(np.sqrt(largest))

    def dual_norm(self, g) -> float:
        """Norm in ``U'`` of the coefficient functional ``u -> u^H g``."""
        return float(np.linalg.norm(self.U.cowhiten(np.asarray(g))))


@dataclasses.dataclass(frozen=True)
class FormReport:
    alpha: float
    bound: float
    coercive: bool
    bounded: bool


@dataclasses.dataclass(frozen=True, eq=False)
class NonAutonomousForm:
    """
    ``a(t, v, w) = w^H A(t) v`` on ``U``, with claimed coercivity and continuity constants.
    """

    evaluator: Evaluator
    alpha: float
    bound_c: float
    name: str = "custom"

    def __call__(self, time: float) -> np.ndarray:
        return np.asarray(self.evaluator(time))

    def coercivity_at(self, triple: GelfandTriple, time: float) -> float:
        matrix = self(time)
        return float(scipy.linalg.eigh((matrix + matrix.conj().T) / 2, triple.gram_U, eigvals_only=True)[0])

    def bound_at(self, triple: GelfandTriple, time: float) -> float:
        matrix = self(time)
        whitened = triple.U.cowhiten(triple.U.cowhiten(matrix).conj().T).conj().T
        return float(scipy.linalg.svdvals(whitened)[0])

    def check(self, triple: GelfandTriple, times: t.Iterable[float], tol: float = COERCIVITY_TOL) -> FormReport:
        """
        Sample both claims at the given times.
        """
        times = list(times)
        alpha = min(self.coercivity_at(triple, time) for time in times)
        bound = max(self.bound_at(triple, time) for time in times)
        return FormReport(
            alpha=alpha,
            bound=bound,
            coercive=alpha >= self.alpha - tol * max(1.0, abs(self.alpha)),
            bounded=bound <= self.bound_c + tol * max(1.0, self.bound_c),
        )


@dataclasses.dataclass(frozen=True, eq=False)
class EvolutionProblem:
    """
    ``u' + A(t) u = f`` on ``(0, T)`` with ``u(0) - Phi* u(T) = y0``.

    ``forcing`` returns ``U'`` coordinates; ``phi`` is an ``H``-contraction given
    in state coordinates. ``exact``, when known, returns the solution at a time.
    """

    triple: GelfandTriple
    form: NonAutonomousForm
    forcing: Evaluator
    horizon: float
    phi: np.ndarray
    y0: np.ndarray
    exact: t.Optional[Evaluator] = None
    name: str = "custom"

    def __post_init__(self):
        n = self.triple.n
        phi = np.asarray(self.phi)
        y0 = np.atleast_1d(np.asarray(self.y0))
        if phi.shape != (n, n):
            raise ArgumentError(f"Boundary map of shape {phi.shape} does not fit state dimension {n}")
        if y0.shape != (n,):
            raise ArgumentError(f"Boundary datum of shape {y0.shape} does not fit state dimension {n}")
        if not self.horizon > 0:
            raise ArgumentError(f"Horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "y0", y0)
        norm = self.phi_norm
        if norm > 1.0 + CONTRACTION_TOL:
            raise AssumptionError(f"Boundary map is not a contraction in H (norm {norm:.6g} > 1)", value=norm)

    @property
    def n(self) -> int:
        return self.triple.n

    @functools.cached_property
    def phi_map(self) -> LinearMap:
        return LinearMap(self.triple.H, self.triple.H, self.phi)

    @property
    def phi_norm(self) -> float:
        return self.phi_map.operator_norm()

    @functools.cached_property
    def phi_adjoint(self) -> np.ndarray:
        """``Phi* = G_H^{-1} Phi^H G_H``."""
        return np.array(self.phi_map.adjoint().coeffs)

    @property
    def manufactured(self) -> bool:
        return self.exact is not None

    def __repr__(self):
        return f"EvolutionProblem(name={self.name}, n={self.n}, T={self.horizon})"


@dataclasses.dataclass
class Diagnostics:
    boundary_residual: float
    stepping_residual: float
    w_norm: float
    propagator_norm: float
    stability: t.Optional[float] = None
    regularity_ratio: t.Optional[float] = None
    sigma_min: t.Optional[float] = None
    wall_time: t.Optional[float] = None


@dataclasses.dataclass
class DiscreteSolution:
    problem: EvolutionProblem
    grid: np.ndarray
    values: np.ndarray
    theta: float
    scheme: str
    diagnostics: t.Optional[Diagnostics] = None

    @property
    def steps(self) -> int:
        return self.grid.size - 1

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def flat(self) -> np.ndarray:
        """Node values stacked into one grid-function vector."""
        return self.values.reshape(-1)
