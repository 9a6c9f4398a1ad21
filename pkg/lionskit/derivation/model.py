import dataclasses
import functools
import logging
import typing as t

import numpy as np

from lionskit.exceptions import ArgumentError, AssumptionError
from lionskit.hilbert import (
    InnerSpace,
    LinearMap,
    Subspace,
    adjoint,
    kernel,
    range_space,
    subspace_intersection,
    subspace_sum,
)

logger = logging.getLogger(__name__)

DERIVATION_TOL = 1e-10
FORM_TOL = 1e-10
CONTRACTION_TOL = 1e-12


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(1.0, float(np.abs(a).max(initial=0.0)), float(np.abs(b).max(initial=0.0)))
    return float(np.abs(a - b).max(initial=0.0)) / scale


def whitened_form(space: InnerSpace, form: np.ndarray) -> np.ndarray:
    """
    Hermitian form ``w^H F v`` expressed in an orthonormal basis of ``space``: ``L^{-1} F L^{-H}``.
    """
    left = space.cowhiten(form)
    return space.cowhiten(left.conj().T).conj().T


@dataclasses.dataclass(frozen=True, eq=False)
class DerivationInstance:
    """
    A derivation, extended to the graph space ``W``.

    ``V`` and ``W`` share coordinates. ``pairing`` is the coefficient array ``P``
    of the antidual pairing ``<D v, w> = w^H P v``, ``D = G_V^{-1} P`` is its Riesz
    representative, and ``W`` carries the graph inner product
    ``<v, w>_V + <D v, D w>_V``. The test space ``R`` must be annihilated by the
    boundary form.
    """

    V: InnerSpace
    W: InnerSpace
    D: LinearMap
    R: Subspace
    pairing: np.ndarray

    def __post_init__(self):
        pairing = self.V.coerce(np.asarray(self.pairing))
        if pairing.shape != (self.V.dim, self.V.dim):
            raise ArgumentError(f"Pairing of shape {pairing.shape} does not fit dimension {self.V.dim}")
        if not (self.D.domain.same_as(self.W) and self.D.codomain.same_as(self.V)):
            raise ArgumentError("Derivation must map W into V")
        if not self.R.ambient.same_as(self.W):
            raise ArgumentError("Test space must be a subspace of W")
        pairing.setflags(write=False)
        object.__setattr__(self, "pairing", pairing)

        form = self.form_matrix
        defect = float(np.abs(form @ self.R.basis).max(initial=0.0))
        scale = max(1.0, float(np.abs(form).max(initial=0.0)))
        if defect > DERIVATION_TOL * scale:
            raise AssumptionError(
                f"Boundary form does not vanish on the test space (defect {defect:.3e})", value=defect
            )

    @classmethod
    def create(cls, V: InnerSpace, pairing: np.ndarray, test_vectors: t.Optional[np.ndarray] = None):
        """
        Build ``D`` and the graph space ``W`` from the pairing array.
        """
        pairing = V.coerce(np.asarray(pairing))
        d_coeffs = V.riesz(pairing)
        gram_w = V.gram + pairing.conj().T @ d_coeffs
        W = InnerSpace(gram=(gram_w + gram_w.conj().T) / 2, scalar_field=V.scalar_field)
        D = LinearMap(W, V, d_coeffs)
        if test_vectors is None:
            R = Subspace.zero(W)
        else:
            R = Subspace.span(W, test_vectors)
        return cls(V=V, W=W, D=D, R=R, pairing=pairing)

    @functools.cached_property
    def form_matrix(self) -> np.ndarray:
        """``F = P + P^H``, so that ``b(v, w) = w^H F v``."""
        return self.pairing + self.pairing.conj().T

    @property
    def dim(self) -> int:
        return self.W.dim

    def pairing_value(self, v, w):
        """``<D v, w>`` in the antidual pairing of ``V``."""
        return self.W.coerce(w).conj().T @ (self.pairing @ self.W.coerce(v))

    def form_scale(self) -> float:
        return max(1.0, float(np.abs(whitened_form(self.W, self.form_matrix)).max(initial=0.0)))

    def __repr__(self):
        return f"DerivationInstance(dim={self.dim}, test_dim={self.R.dim})"


@dataclasses.dataclass(frozen=True)
class StructureReport:
    form_residual: float
    kernel_sum_dim: int
    dim: int
    test_space_residual: float

    @property
    def passed(self) -> bool:
        return (
            self.form_residual <= FORM_TOL
            and self.kernel_sum_dim == self.dim
            and self.test_space_residual <= FORM_TOL
        )


@dataclasses.dataclass(frozen=True, eq=False)
class BoundaryStructure:
    """
    Boundary space ``H`` with operators ``B0, B1: W -> H`` such that
    ``b(v, w) = <B1 v, B1 w>_H - <B0 v, B0 w>_H`` and ``ker B0 + ker B1 = W``.
    """

    H: InnerSpace
    B0: LinearMap
    B1: LinearMap

    def __post_init__(self):
        if not self.B0.domain.same_as(self.B1.domain):
            raise ArgumentError("B0 and B1 must share their domain")
        if not (self.B0.codomain.same_as(self.H) and self.B1.codomain.same_as(self.H)):
            raise ArgumentError("B0 and B1 must map into H")

    @property
    def W(self) -> InnerSpace:
        return self.B0.domain

    @functools.cached_property
    def ran_B0(self) -> Subspace:
        return range_space(self.B0)

    @functools.cached_property
    def ran_B1(self) -> Subspace:
        return range_space(self.B1)

    @functools.cached_property
    def ker_B0(self) -> Subspace:
        return kernel(self.B0)

    @functools.cached_property
    def ker_B1(self) -> Subspace:
        return kernel(self.B1)

    @functools.cached_property
    def form_matrix(self) -> np.ndarray:
        g = self.H.gram
        b0 = self.B0.coeffs
        b1 = self.B1.coeffs
        return b1.conj().T @ g @ b1 - b0.conj().T @ g @ b0

    def form(self, v, w):
        return self.W.coerce(w).conj().T @ (self.form_matrix @ self.W.coerce(v))

    def form_scale(self) -> float:
        return max(1.0, float(np.abs(whitened_form(self.W, self.form_matrix)).max(initial=0.0)))

    def reversed(self) -> "BoundaryStructure":
        """Structure of the sign-reversed derivation ``-D``, whose form is ``-b``."""
        return BoundaryStructure(H=self.H, B0=self.B1, B1=self.B0)

    def check(self, instance: DerivationInstance) -> StructureReport:
        if not instance.W.same_as(self.W):
            raise ArgumentError("Boundary structure and derivation live on different spaces")
        form_residual = _relative_gap(
            whitened_form(self.W, self.form_matrix), whitened_form(self.W, instance.form_matrix)
        )
        kernel_sum = subspace_sum(self.ker_B0, self.ker_B1)
        both = subspace_intersection(self.ker_B0, self.ker_B1)
        test_space_residual = both.distance(instance.R.basis) if instance.R.dim else 0.0
        report = StructureReport(
            form_residual=form_residual,
            kernel_sum_dim=kernel_sum.dim,
            dim=self.W.dim,
            test_space_residual=test_space_residual,
        )
        logger.debug(f"Boundary structure check: {report}")
        return report

    def __repr__(self):
        return f"BoundaryStructure(dim_W={self.W.dim}, dim_H={self.H.dim})"


@dataclasses.dataclass(frozen=True, eq=False)
class ContractionBC:
    """
    Boundary condition ``B1 w = Phi B0 w`` for a contraction ``Phi: ran B0 -> ran B1``.

    ``phi`` is given in ``H`` coordinates. It is only ever applied after
    projecting onto ``ran B0``; the stored ``effective`` map is ``P1 Phi P0``.
    """

    bs: BoundaryStructure
    phi: LinearMap
    tol: float = CONTRACTION_TOL
    effective: LinearMap = dataclasses.field(init=False)
    norm: float = dataclasses.field(init=False)

    def __post_init__(self):
        H = self.bs.H
        if not (self.phi.domain.same_as(H) and self.phi.codomain.same_as(H)):
            raise ArgumentError("Boundary map must act on H")
        p0 = self.bs.ran_B0.projector()
        p1 = self.bs.ran_B1.projector()
        restricted = self.phi @ p0
        stray = H.norm(restricted.coeffs - p1.coeffs @ restricted.coeffs) if H.dim else 0.0
        if stray > 1e-8 * max(1.0, restricted.operator_norm()):
            raise ArgumentError(f"Boundary map leaves the range of B1 (deviation {stray:.3e})")
        effective = p1 @ restricted
        norm = effective.operator_norm()
        if norm > 1.0 + self.tol:
            raise AssumptionError(f"Boundary map is not a contraction on ran B0 (norm {norm:.6g} > 1)", value=norm)
        object.__setattr__(self, "effective", effective)
        object.__setattr__(self, "norm", norm)

    def adjoint(self) -> "ContractionBC":
        """
        ``Phi*: ran B1 -> ran B0`` on the reversed structure, whose space ``Z`` is ``{B0 w = Phi* B1 w}``.
        """
        return ContractionBC(bs=self.bs.reversed(), phi=adjoint(self.effective), tol=self.tol)

    def __repr__(self):
        return f"ContractionBC(norm={self.norm:.6g})"
