"""
Random derivation instances and contractions, for the property suites.
"""

import logging
import typing as t

import numpy as np

from lionskit.derivation.model import BoundaryStructure, ContractionBC, DerivationInstance
from lionskit.exceptions import ArgumentError
from lionskit.hilbert import InnerSpace, LinearMap
from lionskit.util import random_array

logger = logging.getLogger(__name__)

CONTRACTION_KINDS = ("random", "zero", "identity", "negative-identity", "rank-deficient", "isometry")


def random_instance(
    rng: np.random.Generator,
    test_dim: int,
    boundary_dim: int,
    initial_rank: t.Optional[int] = None,
    final_rank: t.Optional[int] = None,
    complex_: bool = False,
) -> t.Tuple[DerivationInstance, BoundaryStructure]:
    """
    A derivation whose boundary form is realized by a known boundary structure.

    ``W`` is split along a random basis ``[R | E0 | E1]``. ``B0`` reads off the
    ``E0`` coordinates and ``B1`` the ``E1`` coordinates, each through a random
    injective map into ``H``. The pairing is the boundary form split in half plus a
    random skew part.
    """
    initial_rank = boundary_dim if initial_rank is None else initial_rank
    final_rank = boundary_dim if final_rank is None else final_rank
    if initial_rank > boundary_dim or final_rank > boundary_dim:
        raise ArgumentError("Ranks of B0 and B1 can not exceed the boundary dimension")
    dim = test_dim + initial_rank + final_rank

    V = InnerSpace.random(rng, dim, complex_=complex_)
    H = InnerSpace.random(rng, boundary_dim, complex_=complex_) if boundary_dim else InnerSpace.euclidean(0, complex_)

    basis = random_array(rng, (dim, dim), complex_) + dim * np.eye(dim)
    coordinates = np.linalg.inv(basis)
    e0 = coordinates[test_dim : test_dim + initial_rank]
    e1 = coordinates[test_dim + initial_rank :]
    b0 = random_array(rng, (boundary_dim, initial_rank), complex_) @ e0
    b1 = random_array(rng, (boundary_dim, final_rank), complex_) @ e1

    form = b1.conj().T @ H.gram @ b1 - b0.conj().T @ H.gram @ b0
    skew = random_array(rng, (dim, dim), complex_)
    pairing = (skew - skew.conj().T) / 2 + form / 2

    instance = DerivationInstance.create(V, pairing, test_vectors=basis[:, :test_dim])
    bs = BoundaryStructure(H=H, B0=LinearMap(instance.W, H, b0), B1=LinearMap(instance.W, H, b1))
    logger.debug(f"Sampled {instance} with boundary space of dimension {boundary_dim}")
    return instance, bs


def random_contraction(
    rng: np.random.Generator, bs: BoundaryStructure, kind: str = "random", norm: t.Optional[float] = None
) -> ContractionBC:
    """
    A contraction ``ran B0 -> ran B1``, built in orthonormal coordinates of both ranges.

    ``identity`` and ``negative-identity`` need ``ran B0 = ran B1``; ``isometry``
    maps the first basis vectors of ``ran B0`` onto those of ``ran B1``.
    """
    if kind not in CONTRACTION_KINDS:
        raise ArgumentError(f"Unknown contraction kind: {kind}")
    H = bs.H
    q0 = H.whiten(bs.ran_B0.basis)
    q1 = H.whiten(bs.ran_B1.basis)
    k0, k1 = q0.shape[1], q1.shape[1]

    if kind in ("identity", "negative-identity"):
        if not bs.ran_B0.equals(bs.ran_B1):
            raise ArgumentError("Identity boundary maps need ran B0 = ran B1")
        sign = -1.0 if kind == "negative-identity" else 1.0
        return ContractionBC(bs=bs, phi=sign * bs.ran_B0.projector(), tol=1e-10)

    if kind == "zero":
        core = np.zeros((k1, k0))
    elif kind == "isometry":
        core = np.eye(k1, k0)
    else:
        core = random_array(rng, (k1, k0), H.is_complex)
        if kind == "rank-deficient" and min(k0, k1) > 0:
            u, s, vh = np.linalg.svd(core, full_matrices=False)
            s[max(1, s.size // 2) :] = 0.0
            core = (u * s) @ vh
        largest = float(np.linalg.norm(core, 2)) if core.size else 0.0
        target = rng.uniform(0.1, 1.0) if norm is None else norm
        if largest > 0:
            core = core * (target / largest)
    whitened = q1 @ core @ q0.conj().T
    return ContractionBC(bs=bs, phi=LinearMap.from_whitened(H, H, whitened), tol=1e-10)
