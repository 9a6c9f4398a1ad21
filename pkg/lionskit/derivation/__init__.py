from lionskit.derivation.boundary import (
    b_orthogonal,
    boundary_form,
    endpoint_structure,
    induced_contraction,
    is_admissible,
    is_maximal_admissible,
    is_strongly_admissible,
    joint_lift,
    restricted_form_spectrum,
    spectral_boundary_structure,
    z_phi,
)
from lionskit.derivation.model import BoundaryStructure, ContractionBC, DerivationInstance
from lionskit.derivation.sample import random_contraction, random_instance
from lionskit.derivation.solver import (
    assemble_sdp,
    solve_sdp,
    solve_sdp_report,
    solve_wdp,
    stability_constant,
    verify_wdp,
)

__all__ = [
    "BoundaryStructure",
    "ContractionBC",
    "DerivationInstance",
    "assemble_sdp",
    "b_orthogonal",
    "boundary_form",
    "endpoint_structure",
    "induced_contraction",
    "is_admissible",
    "is_maximal_admissible",
    "is_strongly_admissible",
    "joint_lift",
    "random_contraction",
    "random_instance",
    "restricted_form_spectrum",
    "solve_sdp",
    "solve_sdp_report",
    "solve_wdp",
    "spectral_boundary_structure",
    "stability_constant",
    "verify_wdp",
    "z_phi",
]
