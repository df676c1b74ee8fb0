"""
Lexicographic max-margin under a non-strictly-convex norm

With samples (1,0), (1,1) and the L∞ ball, the level-1 set is the whole edge
{(1, t) : t ∈ [0, 1]}; the second level picks the corner (1, 1), and the
constrained path follows the corner rather than an arbitrary level-1 point.
"""
import logging

import numpy as np

from margin_paths.errors import DimensionTooLarge
from margin_paths.experiments.base import ExperimentContext, ExperimentResult
from margin_paths.solvers import lexicographic_solve, sweep

logger = logging.getLogger("marginpaths.experiments")

EDGE_SAMPLES = 11
SURVIVOR_TOL = 1e-2
PATH_TOL = 2e-2


def _edge_checks(result: ExperimentResult, level, spacing: float):
    """Every sampled edge point (1, t) must lie near a level-1 survivor"""
    edge = np.column_stack([np.ones(EDGE_SAMPLES), np.linspace(0.0, 1.0, EDGE_SAMPLES)])
    worst = max(level.distance_to(p) for p in edge)
    result.check(
        "T4",
        "level-1 set contains the edge (1, t)",
        worst <= 2.0 * spacing,
        detail=f"worst distance={worst!r} spacing={spacing!r}",
    )


def run_lexicographic(ctx: ExperimentContext) -> ExperimentResult:
    result = ExperimentResult("lexicographic", ("T4",))
    ds = ctx.dataset("lexicographic_demo")
    spec = ctx.spec([{"family": "linear"}], ds.dim)
    norm_tag = ctx.norm("Linf")
    opts = ctx.options(norm_tag)
    resolution = ctx.grid_res(1e-3)

    try:
        chain = lexicographic_solve(spec, ds, opts, mode="certified", grid_res=resolution)
    except DimensionTooLarge:
        logger.warning("total_dim %d too large for the grid oracle, using heuristic mode", spec.total_dim)
        chain = lexicographic_solve(spec, ds, opts, mode="heuristic")
        result.notes.append("heuristic chain: levels are not certified")

    header = ["level", "margin_value", "survivors", "representative", "certified"]
    result.results = (
        header,
        [
            [lvl.level, lvl.margin_value, lvl.survivors.shape[0], lvl.representative.tolist(), lvl.certified]
            for lvl in chain
        ],
    )
    survivors = []
    for lvl in chain:
        for point in lvl.survivors:
            survivors.append([lvl.level, *point.tolist()])
    result.tables["survivors.csv"] = (
        ["level"] + [f"theta_{i}" for i in range(spec.total_dim)],
        survivors,
    )

    demo = not ctx.dataset_overridden() and chain[0].certified
    if demo:
        # resolution is the step along each face of the box grid
        _edge_checks(result, chain[0], resolution)
        corner = np.array([1.0, 1.0])
        last = chain[-1]
        far = float(np.max(np.linalg.norm(last.survivors - corner, axis=1)))
        result.check(
            "T4",
            "final level collapses to (1, 1)",
            far <= SURVIVOR_TOL,
            detail=f"farthest survivor={far!r}",
        )

    grid = ctx.rho_grid(1.0, 2048.0, 12)
    constrained = sweep("constrained", spec, ds, grid, opts)
    ok = constrained.ok_records()
    if ok:
        direction = ok[-1].theta.theta
        distance = chain[-1].distance_to(direction)
        result.check(
            "T4",
            "constrained direction at rho_max follows the last level",
            distance <= PATH_TOL,
            gating=demo,
            detail=f"distance={distance!r} direction={direction.tolist()!r}",
        )
        result.metrics["path_direction"] = direction
    else:
        result.check("T4", "constrained sweep produced a solution", False)
    result.tables["constrained_path.csv"] = constrained.to_rows(ds.n_samples, spec.total_dim)
    result.metrics["levels"] = [lvl.description for lvl in chain]
    return result
