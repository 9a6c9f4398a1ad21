"""
Weighted-inner-product linear algebra.

Vectors are plain coefficient arrays. Every space carries a Hermitian positive
definite Gram array ``G`` and the inner product ``<x, y> = y^H G x``. With the
Cholesky factorization ``G = L L^H``, the map ``x -> L^H x`` ("whitening") is an
isometry onto Euclidean coordinates. Adjoints, gains, square roots and subspace
computations are all carried out in whitened coordinates and mapped back.

Functionals are never stored in a separate coordinate system: a functional is
kept as its Riesz representative, and its dual norm is the norm of that
representative.
"""

import dataclasses
import enum
import logging
import math
import typing as t

import numpy as np
import scipy.linalg

from lionskit.exceptions import ArgumentError, AssumptionError
from lionskit.util import random_array

logger = logging.getLogger(__name__)

GRAM_SYMMETRY_TOL = 1e-12
ORTHONORMALITY_TOL = 1e-10
RANK_TOL = 1e-10
SUBSPACE_TOL = 1e-8
SELF_ADJOINT_TOL = 1e-10


class ScalarField(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @property
    def dtype(self):
        return np.complex128 if self is ScalarField.COMPLEX else np.float64


def _svd(matrix: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Full SVD which also accepts arrays with a zero-sized axis.
    """
    m, n = matrix.shape
    if m == 0 or n == 0:
        return np.eye(m, dtype=matrix.dtype), np.zeros(0), np.eye(n, dtype=matrix.dtype)
    return scipy.linalg.svd(matrix, full_matrices=True)


def _rank(singular_values: np.ndarray, tol: float = RANK_TOL) -> int:
    if singular_values.size == 0:
        return 0
    threshold = tol * max(1.0, float(singular_values[0]))
    return int(np.count_nonzero(singular_values > threshold))


@dataclasses.dataclass(frozen=True, eq=False)
class InnerSpace:
    """
    A finite-dimensional real or complex space with an explicit Gram form.

    Asymmetry of the Gram array up to ``symmetry_tol`` (relative) is averaged out,
    larger asymmetry is rejected.
    """

    gram: np.ndarray
    scalar_field: ScalarField = ScalarField.REAL
    symmetry_tol: float = dataclasses.field(default=GRAM_SYMMETRY_TOL, repr=False)

    def __post_init__(self):
        field = ScalarField(self.scalar_field)
        gram = np.array(self.gram)
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
            raise ArgumentError(f"Gram array must be square, got shape {gram.shape}")
        if field is ScalarField.REAL and np.iscomplexobj(gram):
            if np.abs(gram.imag).max(initial=0.0) > 0.0:
                raise ArgumentError("Real space requires a real Gram array")
            gram = gram.real
        gram = gram.astype(field.dtype)
        scale = max(1.0, float(np.abs(gram).max(initial=0.0)))
        asymmetry = float(np.abs(gram - gram.conj().T).max(initial=0.0))
        if asymmetry > self.symmetry_tol * scale:
            raise ArgumentError(f"Gram array is not Hermitian (deviation {asymmetry:.3e})")
        gram = (gram + gram.conj().T) / 2
        if gram.shape[0] > 0:
            smallest = float(scipy.linalg.eigvalsh(gram)[0])
            if smallest <= 0.0:
                raise ArgumentError(f"Gram array is not positive definite (smallest eigenvalue {smallest:.3e})")
            chol = scipy.linalg.cholesky(gram, lower=True)
        else:
            chol = np.zeros((0, 0), dtype=field.dtype)
        gram.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "scalar_field", field)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def euclidean(cls, dim: int, complex_: bool = False) -> "InnerSpace":
        field = ScalarField.COMPLEX if complex_ else ScalarField.REAL
        return cls(gram=np.eye(dim, dtype=field.dtype), scalar_field=field)

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int, complex_: bool = False, spread: float = 4.0) -> "InnerSpace":
        """
        Random Gram array with eigenvalues in ``[1, spread]``.
        """
        q, _ = np.linalg.qr(random_array(rng, (dim, dim), complex_))
        eigenvalues = rng.uniform(1.0, spread, size=dim)
        gram = (q * eigenvalues) @ q.conj().T
        return cls(gram=gram, scalar_field=ScalarField.COMPLEX if complex_ else ScalarField.REAL)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @property
    def dtype(self):
        return self.scalar_field.dtype

    @property
    def is_complex(self) -> bool:
        return self.scalar_field is ScalarField.COMPLEX

    @property
    def cholesky_factor(self) -> np.ndarray:
        return self._chol  # type: ignore[attr-defined]

    def same_as(self, other: "InnerSpace") -> bool:
        if self is other:
            return True
        return (
            self.dim == other.dim
            and self.scalar_field is other.scalar_field
            and bool(np.allclose(self.gram, other.gram, rtol=1e-13, atol=1e-14))
        )

    def coerce(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[:1] != (self.dim,):
            raise ArgumentError(f"Vector of leading dimension {x.shape[:1]} does not fit space of dimension {self.dim}")
        if not self.is_complex and np.iscomplexobj(x):
            if np.abs(x.imag).max(initial=0.0) > 0.0:
                raise ArgumentError("Complex vector passed to a real space")
            x = x.real
        return x.astype(np.result_type(x.dtype, self.dtype), copy=False)

    def inner(self, x, y):
        """
        ``<x, y> = y^H G x``, linear in ``x``. Columns are paired for 2-D input.
        """
        x = self.coerce(x)
        y = self.coerce(y)
        return y.conj().T @ (self.gram @ x)

    def norm(self, x) -> float:
        x = self.coerce(x)
        if x.ndim == 1:
            return float(np.linalg.norm(self.whiten(x)))
        return float(np.linalg.norm(self.whiten(x), axis=0).max(initial=0.0))

    def norms(self, x) -> np.ndarray:
        return np.linalg.norm(self.whiten(self.coerce(x)), axis=0)

    def whiten(self, x) -> np.ndarray:
        """Coordinates ``L^H x`` in which the inner product is Euclidean."""
        x = np.asarray(x)
        if self.dim == 0 or x.size == 0:
            return np.zeros_like(x, dtype=np.result_type(x.dtype, self.dtype))
        return self.cholesky_factor.conj().T @ x

    def unwhiten(self, z) -> np.ndarray:
        """Inverse of :meth:`whiten`: ``L^{-H} z``."""
        z = np.asarray(z)
        if self.dim == 0 or z.size == 0:
            return np.zeros_like(z, dtype=np.result_type(z.dtype, self.dtype))
        return scipy.linalg.solve_triangular(self.cholesky_factor, z, lower=True, trans="C")

    def cowhiten(self, functional) -> np.ndarray:
        """Whitened coordinates ``L^{-1} phi`` of a coefficient functional ``x -> phi^H x``."""
        functional = np.asarray(functional)
        if self.dim == 0 or functional.size == 0:
            return np.zeros_like(functional, dtype=np.result_type(functional.dtype, self.dtype))
        return scipy.linalg.solve_triangular(self.cholesky_factor, functional, lower=True)

    def uncowhiten(self, psi) -> np.ndarray:
        psi = np.asarray(psi)
        if self.dim == 0 or psi.size == 0:
            return np.zeros_like(psi, dtype=np.result_type(psi.dtype, self.dtype))
        return self.cholesky_factor @ psi

    def riesz(self, functional) -> np.ndarray:
        """
        Representative ``r`` of the functional ``x -> functional^H x``, i.e. ``<x, r> = functional^H x``.
        """
        functional = np.asarray(functional)
        if self.dim == 0 or functional.size == 0:
            return np.zeros_like(functional, dtype=np.result_type(functional.dtype, self.dtype))
        return scipy.linalg.cho_solve((self.cholesky_factor, True), functional)

    def random_vector(self, rng: np.random.Generator, count: t.Optional[int] = None) -> np.ndarray:
        shape = (self.dim,) if count is None else (self.dim, count)
        return random_array(rng, shape, self.is_complex)

    def __repr__(self):
        return f"InnerSpace(dim={self.dim}, scalar_field={self.scalar_field.value})"


@dataclasses.dataclass(frozen=True, eq=False)
class LinearMap:
    """
    A linear operator between two inner-product spaces.

    Adjoints are always taken with respect to the Gram forms of the endpoints.
    """

    domain: InnerSpace
    codomain: InnerSpace
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs)
        if coeffs.shape != (self.codomain.dim, self.domain.dim):
            raise ArgumentError(
                f"Coefficient array of shape {coeffs.shape} does not map "
                f"dimension {self.domain.dim} to dimension {self.codomain.dim}"
            )
        complex_ = self.domain.is_complex or self.codomain.is_complex
        if not complex_ and np.iscomplexobj(coeffs):
            if np.abs(coeffs.imag).max(initial=0.0) > 0.0:
                raise ArgumentError("Complex coefficients between real spaces")
            coeffs = coeffs.real
        coeffs = coeffs.astype(np.complex128 if complex_ else np.float64)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def identity(cls, space: InnerSpace) -> "LinearMap":
        return cls(space, space, np.eye(space.dim))

    @classmethod
    def zero(cls, domain: InnerSpace, codomain: t.Optional[InnerSpace] = None) -> "LinearMap":
        codomain = codomain or domain
        return cls(domain, codomain, np.zeros((codomain.dim, domain.dim)))

    @classmethod
    def random(cls, rng: np.random.Generator, domain: InnerSpace, codomain: t.Optional[InnerSpace] = None):
        codomain = codomain or domain
        complex_ = domain.is_complex or codomain.is_complex
        return cls(domain, codomain, random_array(rng, (codomain.dim, domain.dim), complex_))

    @classmethod
    def from_whitened(cls, domain: InnerSpace, codomain: InnerSpace, matrix: np.ndarray) -> "LinearMap":
        """
        Inverse of :meth:`whitened`: ``coeffs = L_cod^{-H} M L_dom^H``.
        """
        matrix = np.asarray(matrix)
        coeffs = codomain.unwhiten(matrix)
        coeffs = domain.uncowhiten(coeffs.conj().T).conj().T
        return cls(domain, codomain, coeffs)

    @property
    def shape(self) -> t.Tuple[int, int]:
        return self.coeffs.shape

    @property
    def is_endomorphism(self) -> bool:
        return self.domain.same_as(self.codomain)

    def __call__(self, x) -> np.ndarray:
        return self.coeffs @ self.domain.coerce(x)

    def whitened(self) -> np.ndarray:
        """
        Matrix of the map in whitened coordinates: ``L_cod^H T L_dom^{-H}``.
        """
        left = self.codomain.whiten(self.coeffs)
        return self.domain.cowhiten(left.conj().T).conj().T

    def singular_values(self) -> np.ndarray:
        _, s, _ = _svd(self.whitened())
        return s

    def operator_norm(self) -> float:
        s = self.singular_values()
        return float(s[0]) if s.size else 0.0

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        if not isinstance(other, LinearMap):
            return NotImplemented
        if not self.domain.same_as(other.codomain):
            raise ArgumentError("Composition of maps with mismatched spaces")
        return LinearMap(other.domain, self.codomain, self.coeffs @ other.coeffs)

    def _check_same_spaces(self, other: "LinearMap"):
        if not (self.domain.same_as(other.domain) and self.codomain.same_as(other.codomain)):
            raise ArgumentError("Operands live in different spaces")

    def __add__(self, other: "LinearMap") -> "LinearMap":
        self._check_same_spaces(other)
        return LinearMap(self.domain, self.codomain, self.coeffs + other.coeffs)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        self._check_same_spaces(other)
        return LinearMap(self.domain, self.codomain, self.coeffs - other.coeffs)

    def __neg__(self) -> "LinearMap":
        return LinearMap(self.domain, self.codomain, -self.coeffs)

    def __mul__(self, scalar) -> "LinearMap":
        return LinearMap(self.domain, self.codomain, scalar * self.coeffs)

    __rmul__ = __mul__

    def adjoint(self) -> "LinearMap":
        return adjoint(self)

    def inverse(self) -> "LinearMap":
        if self.domain.dim != self.codomain.dim:
            raise ArgumentError(f"Map of shape {self.shape} is not square")
        if smallest_gain(self) <= RANK_TOL * max(1.0, self.operator_norm()):
            raise AssumptionError("Map is not invertible")
        return LinearMap(self.codomain, self.domain, np.linalg.inv(self.coeffs))

    def restrict(self, subspace: "Subspace") -> "LinearMap":
        """
        The map composed with the inclusion of ``subspace``, in its orthonormal basis coordinates.
        """
        if not subspace.ambient.same_as(self.domain):
            raise ArgumentError("Subspace does not live in the domain of the map")
        coordinates = InnerSpace.euclidean(subspace.dim, complex_=self.domain.is_complex)
        return LinearMap(coordinates, self.codomain, self.coeffs @ subspace.basis)

    def is_self_adjoint(self, tol: float = SELF_ADJOINT_TOL) -> bool:
        if not self.is_endomorphism:
            return False
        m = self.whitened()
        scale = max(1.0, float(np.abs(m).max(initial=0.0)))
        return float(np.abs(m - m.conj().T).max(initial=0.0)) <= tol * scale

    def __repr__(self):
        return f"LinearMap({self.domain.dim} -> {self.codomain.dim})"


@dataclasses.dataclass(frozen=True, eq=False)
class Subspace:
    """
    A subspace, represented by a basis which is orthonormal for the Gram form of its ambient space.
    """

    ambient: InnerSpace
    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1)
        if basis.shape[0] != self.ambient.dim:
            raise ArgumentError(f"Basis of shape {basis.shape} does not fit ambient dimension {self.ambient.dim}")
        basis = self.ambient.coerce(basis).astype(self.ambient.dtype)
        if basis.shape[1] > 0:
            deviation = float(np.abs(self.ambient.inner(basis, basis) - np.eye(basis.shape[1])).max())
            if deviation > ORTHONORMALITY_TOL:
                raise ArgumentError(f"Basis is not orthonormal (deviation {deviation:.3e})")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def span(cls, ambient: InnerSpace, vectors, tol: float = RANK_TOL) -> "Subspace":
        """
        Orthonormal basis of the span of the given columns, dropping directions below the rank tolerance.
        """
        vectors = np.asarray(vectors)
        if vectors.ndim == 1:
            vectors = vectors.reshape(-1, 1)
        if vectors.shape[0] != ambient.dim:
            raise ArgumentError(f"Vectors of shape {vectors.shape} do not fit ambient dimension {ambient.dim}")
        u, s, _ = _svd(ambient.whiten(ambient.coerce(vectors)))
        rank = _rank(s, tol)
        return cls(ambient, ambient.unwhiten(u[:, :rank]))

    @classmethod
    def zero(cls, ambient: InnerSpace) -> "Subspace":
        return cls(ambient, np.zeros((ambient.dim, 0), dtype=ambient.dtype))

    @classmethod
    def full(cls, ambient: InnerSpace) -> "Subspace":
        return cls(ambient, ambient.unwhiten(np.eye(ambient.dim, dtype=ambient.dtype)))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> LinearMap:
        """Orthogonal projection ``P = Q Q^H G`` onto the subspace."""
        return LinearMap(self.ambient, self.ambient, self.basis @ (self.basis.conj().T @ self.ambient.gram))

    def project(self, x) -> np.ndarray:
        x = self.ambient.coerce(x)
        return self.basis @ self.ambient.inner(x, self.basis)

    def distance(self, x) -> float:
        x = self.ambient.coerce(x)
        return self.ambient.norm(x - self.project(x))

    def contains(self, other: t.Union["Subspace", np.ndarray], tol: float = SUBSPACE_TOL) -> bool:
        if isinstance(other, Subspace):
            _check_ambient(self, other)
            if other.dim == 0:
                return True
            return self.distance(other.basis) <= tol
        x = self.ambient.coerce(other)
        return self.distance(x) <= tol * max(1.0, self.ambient.norm(x))

    def equals(self, other: "Subspace", tol: float = SUBSPACE_TOL) -> bool:
        return same_subspace(self, other, tol)

    def complement(self) -> "Subspace":
        """Orthogonal complement in the ambient space."""
        u, _, _ = _svd(self.ambient.whiten(self.basis))
        return Subspace(self.ambient, self.ambient.unwhiten(u[:, self.dim :]))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient.dim})"


def _check_ambient(a: Subspace, b: Subspace):
    if not a.ambient.same_as(b.ambient):
        raise ArgumentError("Subspaces live in different ambient spaces")


def adjoint(op: LinearMap) -> LinearMap:
    """
    ``T* = G_dom^{-1} T^H G_cod``, so that ``<T x, y>_cod = <x, T* y>_dom``.
    """
    coeffs = op.domain.riesz(op.coeffs.conj().T @ op.codomain.gram)
    return LinearMap(op.codomain, op.domain, coeffs)


def smallest_gain(op: LinearMap) -> float:
    """
    ``min ||T x|| / ||x||`` over nonzero ``x``, the smallest singular value after whitening.

    Zero whenever the map has a nontrivial kernel. A map on the zero space has infinite gain.
    """
    m, n = op.shape
    if n == 0:
        return math.inf
    if m < n:
        return 0.0
    s = scipy.linalg.svdvals(op.whitened())
    return float(s[-1])


def operator_norm(op: LinearMap) -> float:
    return op.operator_norm()


def min_norm_solve(op: LinearMap, y) -> t.Tuple[np.ndarray, float]:
    """
    Minimal-norm least-squares solution of ``T x = y``, with the codomain norm of the residual.
    """
    y = op.codomain.coerce(y)
    matrix = op.whitened()
    target = op.codomain.whiten(y)
    if matrix.size == 0:
        x = np.zeros((op.domain.dim,) + y.shape[1:], dtype=np.result_type(matrix.dtype, target.dtype))
    else:
        z, *_ = scipy.linalg.lstsq(matrix, target, cond=RANK_TOL)
        x = op.domain.unwhiten(z)
    residual = op.codomain.norm(op(x) - y) if op.codomain.dim else 0.0
    return x, residual


def near_kernel_direction(op: LinearMap) -> np.ndarray:
    """
    Unit vector realizing the smallest gain.
    """
    _, _, vh = _svd(op.whitened())
    return op.domain.unwhiten(vh[-1].conj())


def sqrt_psd(op: LinearMap, tol: float = SELF_ADJOINT_TOL) -> LinearMap:
    """
    Unique self-adjoint positive semidefinite square root.
    """
    sqrt, _ = sqrt_psd_pinv(op, tol=tol)
    return sqrt


def sqrt_psd_pinv(op: LinearMap, tol: float = SELF_ADJOINT_TOL) -> t.Tuple[LinearMap, LinearMap]:
    """
    Square root and pseudo-inverse square root of a self-adjoint positive semidefinite map.
    """
    if not op.is_endomorphism:
        raise ArgumentError("Square root requires a map of a space into itself")
    if not op.is_self_adjoint(tol):
        raise AssumptionError("Map is not self-adjoint")
    matrix = op.whitened()
    matrix = (matrix + matrix.conj().T) / 2
    if matrix.size == 0:
        return op, op
    eigenvalues, vectors = scipy.linalg.eigh(matrix)
    scale = max(1.0, float(np.abs(eigenvalues).max()))
    if eigenvalues[0] < -tol * scale:
        raise AssumptionError(
            f"Map is not positive semidefinite (eigenvalue {eigenvalues[0]:.3e})",
            witness=op.domain.unwhiten(vectors[:, 0]),
            value=float(eigenvalues[0]),
        )
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    roots = np.sqrt(eigenvalues)
    threshold = RANK_TOL * max(1.0, float(roots.max()))
    inverse_roots = np.where(roots > threshold, 1.0 / np.where(roots > threshold, roots, 1.0), 0.0)
    sqrt = (vectors * roots) @ vectors.conj().T
    pinv = (vectors * inverse_roots) @ vectors.conj().T
    return (
        LinearMap.from_whitened(op.domain, op.domain, sqrt),
        LinearMap.from_whitened(op.domain, op.domain, pinv),
    )


def hermitian_part(op: LinearMap) -> LinearMap:
    return 0.5 * (op + adjoint(op))


def skew_part(op: LinearMap) -> LinearMap:
    return 0.5 * (op - adjoint(op))


def coercivity_constant(op: LinearMap) -> float:
    """
    Smallest eigenvalue of the Hermitian part, the best ``alpha`` with ``Re <A v, v> >= alpha ||v||^2``.

    May be zero or negative; the caller decides what that means.
    """
    if not op.is_endomorphism:
        raise ArgumentError("Coercivity requires a map of a space into itself")
    if op.domain.dim == 0:
        return math.inf
    matrix = op.whitened()
    return float(scipy.linalg.eigvalsh((matrix + matrix.conj().T) / 2)[0])


def dissipativity_margin(op: LinearMap) -> t.Tuple[float, np.ndarray]:
    """
    Largest value of ``Re <B x, x> / ||x||^2`` together with a unit vector attaining it.
    """
    matrix = op.whitened()
    eigenvalues, vectors = scipy.linalg.eigh((matrix + matrix.conj().T) / 2)
    return float(eigenvalues[-1]), op.domain.unwhiten(vectors[:, -1])


def kernel(op: LinearMap, tol: float = RANK_TOL) -> Subspace:
    _, s, vh = _svd(op.whitened())
    rank = _rank(s, tol)
    return Subspace(op.domain, op.domain.unwhiten(vh[rank:].conj().T))


def range_space(op: LinearMap, tol: float = RANK_TOL) -> Subspace:
    u, s, _ = _svd(op.whitened())
    rank = _rank(s, tol)
    return Subspace(op.codomain, op.codomain.unwhiten(u[:, :rank]))


def subspace_sum(a: Subspace, b: Subspace) -> Subspace:
    _check_ambient(a, b)
    return Subspace.span(a.ambient, np.hstack([a.basis, b.basis]))


def subspace_intersection(a: Subspace, b: Subspace, tol: float = RANK_TOL) -> Subspace:
    """
    Intersection via the nullspace of ``[Q_a, -Q_b]``: coefficient pairs with ``Q_a x = Q_b y``.
    """
    _check_ambient(a, b)
    if a.dim == 0 or b.dim == 0:
        return Subspace.zero(a.ambient)
    stacked = a.ambient.whiten(np.hstack([a.basis, -b.basis]))
    _, s, vh = _svd(stacked)
    rank = _rank(s, tol)
    null = vh[rank:].conj().T
    return Subspace.span(a.ambient, a.basis @ null[: a.dim])


def principal_angles(a: Subspace, b: Subspace) -> np.ndarray:
    """
    Principal angles in ascending order, ``min(dim a, dim b)`` of them.
    """
    _check_ambient(a, b)
    if a.dim == 0 or b.dim == 0:
        return np.zeros(0)
    angles = scipy.linalg.subspace_angles(a.ambient.whiten(a.basis), b.ambient.whiten(b.basis))
    return np.sort(angles)


def same_subspace(a: Subspace, b: Subspace, tol: float = SUBSPACE_TOL) -> bool:
    if a.dim != b.dim:
        return False
    angles = principal_angles(a, b)
    return bool(angles.size == 0 or angles.max() < tol)


def orthogonal_projection(subspace: Subspace) -> LinearMap:
    return subspace.projector()
