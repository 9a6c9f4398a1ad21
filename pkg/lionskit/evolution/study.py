import concurrent.futures
import dataclasses
import logging
import math
import typing as t

import numpy as np

from lionskit.evolution.discrete import h_norms
from lionskit.evolution.model import EvolutionProblem
from lionskit.evolution.solver import solve_all_at_once
from lionskit.exceptions import ArgumentError

logger = logging.getLogger(__name__)

# Errors below this fraction of the solution scale are rounding noise, their ratios carry no order.
NOISE_FLOOR = 1e-11


@dataclasses.dataclass(frozen=True)
class ConvergenceRow:
    steps: int
    theta: float
    error: float
    order: t.Optional[float] = None


@dataclasses.dataclass
class ConvergenceTable:
    problem: str
    rows: t.List[ConvergenceRow] = dataclasses.field(default_factory=list)

    def orders(self, theta: float) -> t.List[float]:
        return [row.order for row in self.rows if row.theta == theta and row.order is not None]

    def errors(self, theta: float) -> t.List[float]:
        return [row.error for row in self.rows if row.theta == theta]


def grid_error(problem: EvolutionProblem, steps: int, theta: float) -> t.Tuple[float, float]:
    """
    Maximum ``H``-norm error over the grid, and the largest ``H``-norm of the exact solution.
    """
    if problem.exact is None:
        raise ArgumentError(f"Problem {problem.name} has no exact solution")
    solution = solve_all_at_once(problem, steps, theta, diagnostics=False)
    exact = np.array([np.atleast_1d(problem.exact(time)) for time in solution.grid])
    error = float(h_norms(problem, solution.values - exact).max())
    scale = float(h_norms(problem, exact).max())
    logger.debug(f"N={steps}, theta={theta}: error {error:.6e}")
    return error, scale


def observed_order(previous: t.Tuple[int, float], current: t.Tuple[int, float], floor: float) -> t.Optional[float]:
    (steps_prev, error_prev), (steps, error) = previous, current
    if error_prev <= floor or error <= floor:
        return None
    return math.log(error_prev / error) / math.log(steps / steps_prev)


def convergence_study(
    problem: EvolutionProblem,
    steps: t.Sequence[int],
    thetas: t.Sequence[float] = (1.0, 0.5),
    max_workers: t.Optional[int] = None,
) -> ConvergenceTable:
    """
    Errors against the exact solution and observed orders for every pair of
    consecutive step counts. Solves run on a thread pool; the table is assembled
    after all of them finished.
    """
    if problem.exact is None:
        raise ArgumentError(f"Convergence study needs a manufactured problem, {problem.name} has no exact solution")
    steps = sorted(set(int(n) for n in steps))
    if not steps:
        raise ArgumentError("Convergence study needs at least one step count")
    logger.info(f"Convergence study of {problem}: N={steps}, theta={list(thetas)}")

    tasks = [(n, float(theta)) for theta in thetas for n in steps]
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {task: executor.submit(grid_error, problem, *task) for task in tasks}
        results = {task: future.result() for task, future in futures.items()}

    table = ConvergenceTable(problem=problem.name)
    for theta in thetas:
        theta = float(theta)
        previous = None
        for n in steps:
            error, scale = results[(n, theta)]
            order = None
            if previous is not None:
                order = observed_order(previous, (n, error), NOISE_FLOOR * max(1.0, scale))
            table.rows.append(ConvergenceRow(steps=n, theta=theta, error=error, order=order))
            previous = (n, error)
    return table
