"""
Configuration documents, validated with pydantic.

Matrices are row-major nested lists. Every tolerance has a documented default
and may be overridden per run.
"""

import typing as t

from pydantic import BaseModel, ConfigDict, Field, model_validator

from lionskit.derivation.boundary import ADMISSIBILITY_TOL, EIGEN_SPLIT_TOL, MAXIMALITY_TOL
from lionskit.derivation.model import CONTRACTION_TOL
from lionskit.derivation.solver import SOLVER_RESIDUAL_TOL, WDP_RESIDUAL_TOL
from lionskit.evolution.discrete import IBP_TOL
from lionskit.hilbert import GRAM_SYMMETRY_TOL, RANK_TOL, SUBSPACE_TOL
from lionskit.rtl import DISSIPATIVITY_TOL

Matrix = t.List[t.List[float]]
Vector = t.List[float]

SUITES = ("rtl", "derivation", "evolution", "all")


class Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Tolerances(Spec):
    gram_symmetry: float = Field(GRAM_SYMMETRY_TOL, ge=0)
    rank: float = Field(RANK_TOL, ge=0)
    subspace: float = Field(SUBSPACE_TOL, ge=0)
    dissipativity: float = Field(DISSIPATIVITY_TOL, ge=0)
    form_sign: float = Field(ADMISSIBILITY_TOL, ge=0)
    eigen_split: float = Field(EIGEN_SPLIT_TOL, ge=0)
    solver_residual: float = Field(SOLVER_RESIDUAL_TOL, ge=0)
    wdp_residual: float = Field(WDP_RESIDUAL_TOL, ge=0)
    ibp: float = Field(IBP_TOL, ge=0)
    contraction: float = Field(CONTRACTION_TOL, ge=0)
    maximality: float = Field(MAXIMALITY_TOL, ge=0)
    induced_gap: float = Field(1e-9, ge=0)
    agreement: float = Field(1e-8, ge=0)
    boundary_residual: float = Field(1e-10, ge=0)

    @classmethod
    def uniform(cls, value: float) -> "Tolerances":
        """Every tolerance set to the same value."""
        return cls(**{name: value for name in cls.model_fields})


class FormSpec(Spec):
    kind: t.Literal["constant", "polynomial", "trigonometric"] = "constant"
    matrix: t.Optional[Matrix] = None
    coefficients: t.Optional[t.List[Matrix]] = None
    mean: t.Optional[Matrix] = None
    cosine: t.Optional[Matrix] = None
    sine: t.Optional[Matrix] = None
    frequency: float = 1.0

    @model_validator(mode="after")
    def check_kind(self):
        required = {
            "constant": ("matrix",),
            "polynomial": ("coefficients",),
            "trigonometric": ("mean", "cosine", "sine"),
        }[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Form of kind '{self.kind}' requires: {', '.join(missing)}")
        return self


class PhiSpec(Spec):
    kind: t.Literal["initial", "periodic", "antiperiodic", "scaled-rotation", "explicit"] = "initial"
    scale: float = 1.0
    angle: float = 0.0
    matrix: t.Optional[Matrix] = None

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind == "explicit" and self.matrix is None:
            raise ValueError("Boundary map of kind 'explicit' requires: matrix")
        return self


class SolutionSpec(Spec):
    """Closed-form solution a problem is manufactured from."""

    kind: t.Literal["constant", "exponential", "trigonometric"]
    value: t.Optional[Vector] = None
    rate: float = 1.0
    cosine: t.Optional[Vector] = None
    sine: t.Optional[Vector] = None
    frequency: float = 1.0

    @model_validator(mode="after")
    def check_kind(self):
        required = {
            "constant": ("value",),
            "exponential": ("value",),
            "trigonometric": ("cosine", "sine"),
        }[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Solution of kind '{self.kind}' requires: {', '.join(missing)}")
        return self


class ForcingSpec(Spec):
    kind: t.Literal["zero", "constant", "trigonometric", "manufactured"] = "zero"
    value: t.Optional[Vector] = None
    cosine: t.Optional[Vector] = None
    sine: t.Optional[Vector] = None
    frequency: float = 1.0

    @model_validator(mode="after")
    def check_kind(self):
        required = {
            "zero": (),
            "constant": ("value",),
            "trigonometric": ("cosine", "sine"),
            "manufactured": (),
        }[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Forcing of kind '{self.kind}' requires: {', '.join(missing)}")
        return self


class ProblemSpec(Spec):
    """
    Either a named preset, or a custom problem. For ``forcing.kind = manufactured``
    the forcing and ``y0`` are derived from ``exact``.
    """

    preset: t.Optional[str] = None
    dimension: t.Optional[int] = Field(None, ge=1)
    gram_U: t.Optional[Matrix] = None
    gram_H: t.Optional[Matrix] = None
    form: t.Optional[FormSpec] = None
    phi: PhiSpec = PhiSpec()
    forcing: ForcingSpec = ForcingSpec()
    y0: t.Optional[Vector] = None
    horizon: float = Field(1.0, gt=0)
    exact: t.Optional[SolutionSpec] = None

    @model_validator(mode="after")
    def check_custom(self):
        if self.preset is not None:
            return self
        if self.dimension is None:
            raise ValueError("Custom problems require: dimension")
        if self.form is None:
            raise ValueError("Custom problems require: form")
        if self.forcing.kind == "manufactured" and self.exact is None:
            raise ValueError("Manufactured forcing requires: exact")
        return self


class DiscretizationSpec(Spec):
    steps: int = Field(64, ge=2)
    theta: float = Field(1.0, ge=0.5, le=1.0)
    scheme: t.Literal["all-at-once", "shooting", "derivation"] = "all-at-once"
    sweep: t.List[t.Annotated[int, Field(ge=2)]] = [16, 32, 64, 128, 256, 512]
    thetas: t.List[t.Annotated[float, Field(ge=0.5, le=1.0)]] = [1.0, 0.5]


class SuiteCounts(Spec):
    """Instance counts per suite; the defaults are the acceptance sizes."""

    operators: int = Field(200, ge=1)
    functionals: int = Field(20, ge=1)
    perturbation_pairs: int = Field(200, ge=1)
    perturbation_vectors: int = Field(100, ge=1)
    structures: int = Field(100, ge=1)
    maximality_instances: int = Field(50, ge=1)
    maximality_candidates: int = Field(200, ge=1)
    contractions: int = Field(100, ge=1)
    ibp_pairs: int = Field(1000, ge=1)
    problems: int = Field(20, ge=1)

    @classmethod
    def scaled(cls, factor: float) -> "SuiteCounts":
        defaults = cls()
        return cls(**{name: max(1, int(round(getattr(defaults, name) * factor))) for name in cls.model_fields})


class OutputSpec(Spec):
    directory: str = "."
    trajectory: str = "trajectory.csv"
    diagnostics: str = "diagnostics.json"
    convergence: str = "convergence.csv"
    report: str = "report.json"
    timing: bool = False


class RunConfig(Spec):
    mode: t.Literal["solve", "verify", "converge"] = "solve"
    problem: t.Optional[ProblemSpec] = None
    discretization: DiscretizationSpec = DiscretizationSpec()
    seed: int = 7
    suite: t.Literal["rtl", "derivation", "evolution", "all"] = "all"
    counts: SuiteCounts = SuiteCounts()
    output: OutputSpec = OutputSpec()
    tolerances: Tolerances = Tolerances()

    @model_validator(mode="after")
    def check_problem(self):
        if self.mode in ("solve", "converge") and self.problem is None:
            raise ValueError(f"Mode '{self.mode}' requires: problem")
        return self


def normalize(document: t.Dict[str, t.Any]) -> t.Dict[str, t.Any]:
    """Canonical form of a configuration document, defaults filled in."""
    return RunConfig.model_validate(document).model_dump(mode="json")


def emit(config: RunConfig) -> str:
    return config.model_dump_json(indent=2)


def parse(text: str) -> RunConfig:
    return RunConfig.model_validate_json(text)
