from lionskit.evolution.discrete import (
    Discretization,
    TimeGrid,
    discrete_ibp_check,
    discretize,
    h_norms,
)
from lionskit.evolution.model import (
    Diagnostics,
    DiscreteSolution,
    EvolutionProblem,
    GelfandTriple,
    NonAutonomousForm,
)
from lionskit.evolution.presets import PRESETS, boundary_map, manufacture, preset_problem, random_problem
from lionskit.evolution.solver import (
    compute_diagnostics,
    dense_derivation_solve,
    energy_profile,
    propagator,
    propagator_contraction,
    regularity_ratio,
    solve_all_at_once,
    solve_shooting,
    stacked_sigma_min,
)
from lionskit.evolution.study import ConvergenceRow, ConvergenceTable, convergence_study

__all__ = [
    "PRESETS",
    "ConvergenceRow",
    "ConvergenceTable",
    "Diagnostics",
    "DiscreteSolution",
    "Discretization",
    "EvolutionProblem",
    "GelfandTriple",
    "NonAutonomousForm",
    "TimeGrid",
    "boundary_map",
    "compute_diagnostics",
    "convergence_study",
    "dense_derivation_solve",
    "discrete_ibp_check",
    "discretize",
    "energy_profile",
    "h_norms",
    "manufacture",
    "preset_problem",
    "propagator",
    "propagator_contraction",
    "random_problem",
    "regularity_ratio",
    "solve_all_at_once",
    "solve_shooting",
    "stacked_sigma_min",
]
