"""
Boundary forms, admissible subspaces and the spaces ``Z_Phi`` of boundary conditions.
"""

import dataclasses
import logging
import typing as t

import numpy as np
import scipy.linalg

from lionskit.derivation.model import BoundaryStructure, ContractionBC, DerivationInstance, whitened_form
from lionskit.exceptions import AssumptionError, InvariantViolation
from lionskit.hilbert import (
    RANK_TOL,
    InnerSpace,
    LinearMap,
    Subspace,
    kernel,
    min_norm_solve,
    sqrt_psd,
)
from lionskit.util import make_rng, random_array

logger = logging.getLogger(__name__)

EIGEN_SPLIT_TOL = 1e-10
ADMISSIBILITY_TOL = 1e-10
MAXIMALITY_TOL = 1e-8
LIFT_TOL = 1e-9


def boundary_form(instance: DerivationInstance, v, w):
    """
    ``b(v, w) = <D v, w> + conj(<D w, v>)``.
    """
    return instance.pairing_value(v, w) + np.conj(instance.pairing_value(w, v))


def restricted_form_spectrum(
    form: t.Union[BoundaryStructure, DerivationInstance], subspace: Subspace
) -> t.Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues, ascending, and eigenvectors in ``W`` coordinates of ``b`` restricted to the subspace.
    """
    if subspace.dim == 0:
        return np.zeros(0), np.zeros((subspace.ambient.dim, 0), dtype=subspace.ambient.dtype)
    q = subspace.basis
    m = q.conj().T @ form.form_matrix @ q
    eigenvalues, vectors = scipy.linalg.eigh((m + m.conj().T) / 2)
    return eigenvalues, q @ vectors


@dataclasses.dataclass(frozen=True)
class AdmissibilityCertificate:
    """
    Outcome of an admissibility test. A failing certificate carries a violating vector.
    """

    admissible: bool
    contains_test_space: bool
    largest_value: float
    witness: t.Optional[np.ndarray] = None
    strong: t.Optional[bool] = None
    smallest_orthogonal_value: t.Optional[float] = None

    def __bool__(self) -> bool:
        if self.strong is not None:
            return self.admissible and self.strong
        return self.admissible


def is_admissible(
    bs: BoundaryStructure, subspace: Subspace, test_space: Subspace, tol: float = ADMISSIBILITY_TOL
) -> AdmissibilityCertificate:
    contains = subspace.contains(test_space)
    eigenvalues, vectors = restricted_form_spectrum(bs, subspace)
    largest = float(eigenvalues[-1]) if eigenvalues.size else 0.0
    witness = None
    if largest > tol * bs.form_scale():
        witness = vectors[:, -1]
    elif not contains:
        outside = test_space.basis - subspace.project(test_space.basis)
        witness = test_space.basis[:, int(np.argmax(subspace.ambient.norms(outside)))]
    return AdmissibilityCertificate(
        admissible=contains and witness is None,
        contains_test_space=contains,
        largest_value=largest,
        witness=witness,
    )


def is_strongly_admissible(
    bs: BoundaryStructure, subspace: Subspace, test_space: Subspace, tol: float = ADMISSIBILITY_TOL
) -> AdmissibilityCertificate:
    certificate = is_admissible(bs, subspace, test_space, tol=tol)
    orthogonal = b_orthogonal(bs, subspace)
    eigenvalues, vectors = restricted_form_spectrum(bs, orthogonal)
    smallest = float(eigenvalues[0]) if eigenvalues.size else 0.0
    strong = smallest >= -tol * bs.form_scale()
    witness = certificate.witness
    if witness is None and not strong:
        witness = vectors[:, 0]
    return dataclasses.replace(certificate, strong=strong, smallest_orthogonal_value=smallest, witness=witness)


@dataclasses.dataclass(frozen=True)
class MaximalityCertificate:
    admissible: bool
    candidates: int
    extended_violations: int
    smallest_extension_value: float
    escaping_candidate: t.Optional[np.ndarray] = None

    def __bool__(self) -> bool:
        return self.admissible and self.extended_violations == self.candidates


def is_maximal_admissible(
    bs: BoundaryStructure,
    subspace: Subspace,
    test_space: Subspace,
    candidates: int = 200,
    seed: t.Union[int, np.random.Generator, None] = None,
    tol: float = MAXIMALITY_TOL,
    form_tol: float = ADMISSIBILITY_TOL,
) -> MaximalityCertificate:
    """
    Test maximality: every extension by one random vector outside the subspace must
    contain a vector with ``b(v, v) > tol``.
    """
    rng = make_rng(seed)
    admissible = bool(is_admissible(bs, subspace, test_space, tol=form_tol))
    complement = subspace.complement()
    if complement.dim == 0:
        return MaximalityCertificate(
            admissible=admissible, candidates=0, extended_violations=0, smallest_extension_value=np.inf
        )

    W = subspace.ambient
    coefficients = random_array(rng, (complement.dim, candidates), W.is_complex)
    violations = 0
    smallest = np.inf
    escaping = None
    for index in range(candidates):
        direction = complement.basis @ coefficients[:, index]
        extended = Subspace(W, np.hstack([subspace.basis, (direction / W.norm(direction)).reshape(-1, 1)]))
        eigenvalues, _ = restricted_form_spectrum(bs, extended)
        value = float(eigenvalues[-1])
        smallest = min(smallest, value)
        if value > tol:
            violations += 1
        elif escaping is None:
            escaping = direction
    return MaximalityCertificate(
        admissible=admissible,
        candidates=candidates,
        extended_violations=violations,
        smallest_extension_value=float(smallest),
        escaping_candidate=escaping,
    )


def spectral_boundary_structure(instance: DerivationInstance, tol: float = EIGEN_SPLIT_TOL) -> BoundaryStructure:
    """
    Boundary structure with ``H = W`` from the positive and negative parts of the
    self-adjoint representative of ``b``.

    Eigenvalues within ``tol`` (relative) of zero belong to both kernels.
    """
    W = instance.W
    matrix = whitened_form(W, instance.form_matrix)
    if W.dim == 0:
        zero = LinearMap.zero(W)
        return BoundaryStructure(H=W, B0=zero, B1=zero)
    eigenvalues, vectors = scipy.linalg.eigh((matrix + matrix.conj().T) / 2)
    threshold = tol * max(1.0, float(np.abs(eigenvalues).max()))
    positive = np.where(eigenvalues > threshold, eigenvalues, 0.0)
    negative = np.where(eigenvalues < -threshold, -eigenvalues, 0.0)
    b_plus = LinearMap.from_whitened(W, W, (vectors * positive) @ vectors.conj().T)
    b_minus = LinearMap.from_whitened(W, W, (vectors * negative) @ vectors.conj().T)
    logger.debug(
        f"Spectral split: {int(np.count_nonzero(positive))} positive, "
        f"{int(np.count_nonzero(negative))} negative, dimension {W.dim}"
    )
    return BoundaryStructure(H=W, B0=sqrt_psd(b_minus), B1=sqrt_psd(b_plus))


def endpoint_structure(
    instance: DerivationInstance, H: InnerSpace, b0_coeffs: np.ndarray, b1_coeffs: np.ndarray
) -> BoundaryStructure:
    """
    Validated boundary structure for user-supplied boundary operators.
    """
    bs = BoundaryStructure(
        H=H, B0=LinearMap(instance.W, H, b0_coeffs), B1=LinearMap(instance.W, H, b1_coeffs)
    )
    report = bs.check(instance)
    if not report.passed:
        raise AssumptionError(
            f"Boundary operators do not realize the boundary form: form residual {report.form_residual:.3e}, "
            f"kernel sum dimension {report.kernel_sum_dim} of {report.dim}, "
            f"test space residual {report.test_space_residual:.3e}"
        )
    return bs


def z_phi(cbc: ContractionBC) -> Subspace:
    """
    ``Z_Phi = {w : B1 w = Phi B0 w}``.
    """
    bs = cbc.bs
    return kernel(bs.B1 - cbc.effective @ bs.B0)


def b_orthogonal(form: t.Union[BoundaryStructure, DerivationInstance], subspace: Subspace) -> Subspace:
    """
    ``{u in W : b(u, z) = 0 for all z in Z}``.
    """
    W = subspace.ambient
    coordinates = InnerSpace.euclidean(subspace.dim, complex_=W.is_complex)
    return kernel(LinearMap(W, coordinates, subspace.basis.conj().T @ form.form_matrix))


def _check_member(subspace: Subspace, x: np.ndarray, label: str):
    gap = subspace.distance(x)
    if gap > LIFT_TOL * max(1.0, subspace.ambient.norm(x)):
        raise AssumptionError(f"{label} is not in the range (distance {gap:.3e})", witness=x, value=gap)


def joint_lift(bs: BoundaryStructure, x0, x1) -> np.ndarray:
    """
    ``w`` with ``B0 w = x0`` and ``B1 w = x1``.

    Preimages ``w1`` of ``x0`` and ``w2`` of ``x1`` are split along
    ``ker B0 + ker B1``; the pieces ``w1 - (ker B0 part)`` and
    ``w2 - (ker B1 part)`` are recombined.
    """
    x0 = bs.H.coerce(x0)
    x1 = bs.H.coerce(x1)
    _check_member(bs.ran_B0, x0, "x0")
    _check_member(bs.ran_B1, x1, "x1")
    W = bs.W

    w1, _ = min_norm_solve(bs.B0, x0)
    w2, _ = min_norm_solve(bs.B1, x1)

    k0 = bs.ker_B0.basis
    k1 = bs.ker_B1.basis
    coordinates = InnerSpace.euclidean(k0.shape[1] + k1.shape[1], complex_=W.is_complex)
    splitter = LinearMap(coordinates, W, np.hstack([k0, k1]))
    c1, _ = min_norm_solve(splitter, w1)
    c2, _ = min_norm_solve(splitter, w2)
    w11 = k1 @ c1[k0.shape[1] :]
    w20 = k0 @ c2[: k0.shape[1]]
    w = w11 + w20

    residual = max(bs.H.norm(bs.B0(w) - x0), bs.H.norm(bs.B1(w) - x1)) if bs.H.dim else 0.0
    if residual > LIFT_TOL * max(1.0, bs.H.norm(x0), bs.H.norm(x1)):
        raise InvariantViolation(f"Joint lift residual {residual:.3e} exceeds tolerance", {"residual": residual})
    return w


def induced_contraction(
    bs: BoundaryStructure,
    subspace: Subspace,
    test_space: t.Optional[Subspace] = None,
    tol: float = 1e-9,
    form_tol: float = ADMISSIBILITY_TOL,
) -> ContractionBC:
    """
    The contraction with ``Phi B0 w = B1 w`` on ``B0 Z``, extended by zero on the
    orthogonal complement of ``B0 Z`` inside ``ran B0``. Then ``Z`` is contained in ``Z_Phi``.
    """
    test_space = test_space if test_space is not None else Subspace.zero(bs.W)
    certificate = is_admissible(bs, subspace, test_space, tol=form_tol)
    if not certificate:
        raise AssumptionError(
            f"Subspace is not admissible (largest boundary form value {certificate.largest_value:.3e})",
            witness=certificate.witness,
            value=certificate.largest_value,
        )
    H = bs.H
    y0 = H.whiten(bs.B0(subspace.basis))
    y1 = H.whiten(bs.B1(subspace.basis))
    if y0.size == 0:
        whitened = np.zeros((H.dim, H.dim), dtype=H.dtype)
    else:
        scale = max(1.0, float(scipy.linalg.norm(y0, 2)))
        whitened = y1 @ scipy.linalg.pinv(y0, atol=RANK_TOL * scale, rtol=0.0)
    phi = LinearMap.from_whitened(H, H, whitened)
    cbc = ContractionBC(bs=bs, phi=phi, tol=tol)

    gap = z_phi(cbc).distance(subspace.basis) if subspace.dim else 0.0
    if gap > 1e-8:
        raise InvariantViolation(f"Subspace is not contained in the induced Z_Phi (gap {gap:.3e})", {"gap": gap})
    return cbc
