"""
Trajectory and convergence tables as CSV, diagnostics as JSON.

Output is deterministic: numbers are written with 17 significant digits and
wall times only appear when timing was requested.
"""

import csv
import io
import logging
import typing as t
from pathlib import Path

from pydantic import BaseModel

from lionskit.evolution.model import DiscreteSolution
from lionskit.evolution.study import ConvergenceTable

logger = logging.getLogger(__name__)

NOT_APPLICABLE = "n/a"


def _number(value) -> str:
    return format(value, ".17g")


class DiagnosticsRecord(BaseModel):
    problem: str
    scheme: str
    steps: int
    theta: float
    dimension: int
    boundary_residual: float
    stepping_residual: float
    w_norm: float
    propagator_norm: float
    stability: t.Optional[float] = None
    regularity_ratio: t.Optional[float] = None
    sigma_min: t.Optional[float] = None
    wall_time: t.Optional[float] = None

    @classmethod
    def from_solution(cls, solution: DiscreteSolution) -> "DiagnosticsRecord":
        diagnostics = solution.diagnostics
        if diagnostics is None:
            raise ValueError("Solution carries no diagnostics")
        return cls(
            problem=solution.problem.name,
            scheme=solution.scheme,
            steps=solution.steps,
            theta=solution.theta,
            dimension=solution.problem.n,
            boundary_residual=diagnostics.boundary_residual,
            stepping_residual=diagnostics.stepping_residual,
            w_norm=diagnostics.w_norm,
            propagator_norm=diagnostics.propagator_norm,
            stability=diagnostics.stability,
            regularity_ratio=diagnostics.regularity_ratio,
            sigma_min=diagnostics.sigma_min,
            wall_time=diagnostics.wall_time,
        )


def trajectory_csv(solution: DiscreteSolution) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["t"] + [f"u_{i + 1}" for i in range(solution.problem.n)])
    for time, value in zip(solution.grid, solution.values):
        writer.writerow([_number(float(time))] + [_number(component) for component in value])
    return buffer.getvalue()


def convergence_csv(table: ConvergenceTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["N", "theta", "error", "order"])
    for row in table.rows:
        order = NOT_APPLICABLE if row.order is None else _number(row.order)
        writer.writerow([row.steps, _number(row.theta), _number(row.error), order])
    return buffer.getvalue()


def diagnostics_json(solution: DiscreteSolution) -> str:
    return DiagnosticsRecord.from_solution(solution).model_dump_json(indent=2) + "\n"


def write_text(path: t.Union[str, Path], content: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path
