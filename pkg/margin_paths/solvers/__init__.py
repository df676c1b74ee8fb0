"""
Path solvers: constrained, margin, regularization and optimization paths,
the lexicographic chain, the swapped-problem check and the grid oracle.
"""
from margin_paths.solvers.lexicographic import LexLevel, lexicographic_solve
from margin_paths.solvers.oracle import OracleResult, grid_oracle, sphere_grid
from margin_paths.solvers.pareto import ParetoPoint, ParetoReport, pareto_cross_check
from margin_paths.solvers.paths import (
    checkpoint_schedule,
    optimization_path,
    regularization_path,
    solve_constrained,
    solve_margin,
    sweep,
)
from margin_paths.solvers.records import PathRecord, RunResult, SolverOptions, SweepResult
from margin_paths.solvers.sphere import project_l1_ball, project_simplex, retract

__all__ = [
    "LexLevel",
    "OracleResult",
    "ParetoPoint",
    "ParetoReport",
    "PathRecord",
    "RunResult",
    "SolverOptions",
    "SweepResult",
    "checkpoint_schedule",
    "grid_oracle",
    "lexicographic_solve",
    "optimization_path",
    "pareto_cross_check",
    "project_l1_ball",
    "project_simplex",
    "regularization_path",
    "retract",
    "solve_constrained",
    "solve_margin",
    "sphere_grid",
    "sweep",
]
