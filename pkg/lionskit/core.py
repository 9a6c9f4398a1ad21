import json
import logging
import time
import typing as t
from pathlib import Path

import numpy as np
from pueblo.io import to_io
from pydantic import ValidationError

from lionskit.evolution import (
    EvolutionProblem,
    GelfandTriple,
    boundary_map,
    convergence_study,
    dense_derivation_solve,
    manufacture,
    preset_problem,
    solve_all_at_once,
    solve_shooting,
)
from lionskit.evolution.export import convergence_csv, diagnostics_json, trajectory_csv, write_text
from lionskit.evolution.model import DiscreteSolution
from lionskit.evolution.presets import (
    ConstantForcing,
    ConstantSolution,
    ExponentialSolution,
    TrigonometricForcing,
    TrigonometricSolution,
    ZeroForcing,
    constant_form,
    polynomial_form,
    trigonometric_form,
)
from lionskit.evolution.study import ConvergenceTable
from lionskit.exceptions import ArgumentError, ConfigError
from lionskit.model import FormSpec, ProblemSpec, RunConfig, SolutionSpec, Tolerances
from lionskit.suite import SuiteReport, run_suite

logger = logging.getLogger(__name__)

SCHEMES = {
    "all-at-once": solve_all_at_once,
    "shooting": solve_shooting,
    "derivation": dense_derivation_solve,
}


def solver_options(scheme: str, tolerances: Tolerances) -> t.Dict[str, float]:
    """Tolerances of a run, as keyword arguments of the solver of the scheme."""
    options = {"boundary_tol": tolerances.boundary_residual}
    if scheme == "derivation":
        options.update(residual_tol=tolerances.solver_residual, wdp_tol=tolerances.wdp_residual)
    return options


def _field(error: ValidationError) -> t.Optional[str]:
    errors = error.errors()
    if not errors:
        return None
    return ".".join(str(part) for part in errors[0]["loc"]) or None


def load_config(source: str) -> RunConfig:
    """
    Read and validate a configuration document from a path or URL.
    """
    logger.info(f"Loading configuration from: {source}")
    try:
        with to_io(source, "r") as f:
            document = json.load(f)
    except json.JSONDecodeError as ex:
        raise ConfigError(f"Invalid JSON in {source}, line {ex.lineno}: {ex.msg}", path=source) from ex
    except OSError as ex:
        raise ConfigError(f"Unable to read configuration {source}: {ex}", path=source) from ex
    return validate_config(document, path=source)


def validate_config(document: t.Any, path: t.Optional[str] = None) -> RunConfig:
    try:
        return RunConfig.model_validate(document)
    except ValidationError as ex:
        field = _field(ex)
        message = ex.errors()[0]["msg"] if ex.errors() else str(ex)
        raise ConfigError(f"Invalid configuration at '{field}': {message}", path=path, field=field) from ex


def _square(matrix, n: int, label: str) -> np.ndarray:
    array = np.asarray(matrix, dtype=float)
    if array.shape != (n, n):
        raise ArgumentError(f"{label} of shape {array.shape} does not fit dimension {n}")
    return array


def _vector(values, n: int, label: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.shape != (n,):
        raise ArgumentError(f"{label} of shape {array.shape} does not fit dimension {n}")
    return array


def _form(spec: FormSpec, triple: GelfandTriple, horizon: float):
    n = triple.n
    if spec.kind == "constant":
        return constant_form(_square(spec.matrix, n, "Form matrix"), triple)
    if spec.kind == "polynomial":
        coefficients = [_square(c, n, "Form coefficient") for c in spec.coefficients or []]
        return polynomial_form(coefficients, triple, horizon)
    return trigonometric_form(
        _square(spec.mean, n, "Form mean"),
        _square(spec.cosine, n, "Form cosine part"),
        _square(spec.sine, n, "Form sine part"),
        triple,
        horizon,
        frequency=spec.frequency,
    )


def _solution(spec: SolutionSpec, n: int):
    if spec.kind == "constant":
        return ConstantSolution(_vector(spec.value, n, "Exact value"))
    if spec.kind == "exponential":
        return ExponentialSolution(_vector(spec.value, n, "Exact amplitude"), rate=spec.rate)
    return TrigonometricSolution(
        _vector(spec.cosine, n, "Exact cosine part"), _vector(spec.sine, n, "Exact sine part"), spec.frequency
    )


def build_problem(spec: ProblemSpec, tolerances: t.Optional[Tolerances] = None) -> EvolutionProblem:
    """
    Evolution problem from its configuration: a named preset, or assembled from parts.
    """
    tolerances = tolerances or Tolerances()
    if spec.preset is not None:
        return preset_problem(spec.preset)
    n = int(spec.dimension or 0)
    identity = np.eye(n)
    triple = GelfandTriple(
        gram_U=identity if spec.gram_U is None else _square(spec.gram_U, n, "Gram array of U"),
        gram_H=identity if spec.gram_H is None else _square(spec.gram_H, n, "Gram array of H"),
        symmetry_tol=tolerances.gram_symmetry,
    )
    form = _form(spec.form, triple, spec.horizon)
    phi_spec = spec.phi
    matrix = _square(phi_spec.matrix, n, "Boundary map") if phi_spec.matrix is not None else None
    phi = boundary_map(phi_spec.kind, triple, scale=phi_spec.scale, angle=phi_spec.angle, matrix=matrix)

    exact = _solution(spec.exact, n) if spec.exact is not None else None
    if spec.forcing.kind == "manufactured":
        return manufacture(triple, form, exact, phi, spec.horizon, name="custom")

    forcing_spec = spec.forcing
    if forcing_spec.kind == "zero":
        forcing = ZeroForcing(n)
    elif forcing_spec.kind == "constant":
        forcing = ConstantForcing(_vector(forcing_spec.value, n, "Forcing"))
    else:
        forcing = TrigonometricForcing(
            _vector(forcing_spec.cosine, n, "Forcing cosine part"),
            _vector(forcing_spec.sine, n, "Forcing sine part"),
            forcing_spec.frequency,
        )
    y0 = np.zeros(n) if spec.y0 is None else _vector(spec.y0, n, "Boundary datum")
    return EvolutionProblem(
        triple=triple, form=form, forcing=forcing, horizon=spec.horizon, phi=phi, y0=y0, exact=exact, name="custom"
    )


class LionsKit:
    """
    Run a configuration: solve a problem, run the verification suites, or tabulate convergence.
    """

    def __init__(self, config: RunConfig, out: t.Optional[t.Union[str, Path]] = None):
        self.config = config
        self.out = Path(out if out is not None else config.output.directory)

    @classmethod
    def from_source(cls, source: str, out: t.Optional[t.Union[str, Path]] = None) -> "LionsKit":
        return cls(load_config(source), out=out)

    def run(self):
        mode = self.config.mode
        if mode == "solve":
            return self.run_solve()
        if mode == "verify":
            return self.run_verify()
        return self.run_converge()

    @property
    def problem(self) -> EvolutionProblem:
        if self.config.problem is None:
            raise ConfigError("Configuration has no problem", field="problem")
        return build_problem(self.config.problem, self.config.tolerances)

    def run_solve(self) -> DiscreteSolution:
        discretization = self.config.discretization
        problem = self.problem
        solver = SCHEMES[discretization.scheme]
        started = time.perf_counter()
        options = solver_options(discretization.scheme, self.config.tolerances)
        solution = solver(problem, discretization.steps, discretization.theta, **options)
        elapsed = time.perf_counter() - started
        if self.config.output.timing and solution.diagnostics is not None:
            solution.diagnostics.wall_time = elapsed
        logger.info(f"Solved {problem} in {elapsed:.3f}s, u(T) = {solution.final}")
        output = self.config.output
        write_text(self.out / output.trajectory, trajectory_csv(solution))
        write_text(self.out / output.diagnostics, diagnostics_json(solution))
        return solution

    def run_verify(self) -> SuiteReport:
        config = self.config
        report = run_suite(
            config.suite,
            seed=config.seed,
            tolerances=config.tolerances,
            counts=config.counts,
            timing=config.output.timing,
        )
        write_text(self.out / config.output.report, report.model_dump_json(indent=2) + "\n")
        return report

    def run_converge(self) -> ConvergenceTable:
        discretization = self.config.discretization
        table = convergence_study(self.problem, discretization.sweep, discretization.thetas)
        write_text(self.out / self.config.output.convergence, convergence_csv(table))
        return table
