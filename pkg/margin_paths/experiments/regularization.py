"""
Regularization path and the constrained path

regularization_link: ‖θ_r(c)‖ grows with c and θ_r(c) solves the constrained
problem at ρ = ‖θ_r(c)‖, so both paths share losses and objectives.
pareto_check: φ(ρ) = min ℒ over the ρ-ball decreases strictly and ρ is the
smallest norm reaching φ(ρ).
"""
import logging

import numpy as np

from margin_paths.experiments.base import ExperimentContext, ExperimentResult
from margin_paths.solvers import pareto_cross_check, regularization_path, solve_constrained, sweep

logger = logging.getLogger("marginpaths.experiments")

DEFAULT_C = (10.0, 100.0, 1e3, 1e4)
LOSS_TOL = 1e-6


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def run_regularization_link(ctx: ExperimentContext) -> ExperimentResult:
    result = ExperimentResult("regularization_link", ("F9", "F10", "F11"))
    ds = ctx.dataset("separable_gaussian", d=2, N=5)
    spec = ctx.spec([{"family": "linear"}], ds.dim)
    opts = ctx.options("L2")
    c_grid = ctx.config.grids.c or list(DEFAULT_C)

    reg = regularization_path(spec, ds, c_grid, opts)
    ok = reg.ok_records()
    norms = [r.theta_norm for r in ok]
    result.check(
        "F9",
        "‖θ_r(c)‖ strictly increasing in c",
        len(ok) == len(reg.records) and all(b > a for a, b in zip(norms, norms[1:])),
        detail=f"norms={norms!r}",
    )

    header = [
        "c",
        "theta_r_norm",
        "log_loss_r",
        "log_loss_c",
        "objective_r",
        "objective_c",
        "direction_distance",
        "loss_match",
        "objective_match",
    ]
    rows = []
    warm = None
    for idx, rec in enumerate(ok):
        rho = rec.theta_norm
        con = solve_constrained(spec, ds, rho, opts, warm_start=warm, stream=idx)
        warm = con.theta.theta
        objective_r = float(np.exp(rec.log_loss)) + rho**2 / rec.scale
        objective_c = float(np.exp(con.log_loss)) + rho**2 / rec.scale
        loss_match = _close(rec.log_loss, con.log_loss, LOSS_TOL)
        objective_match = _close(objective_r, objective_c, LOSS_TOL)
        distance = float(np.linalg.norm(rec.theta.theta - con.theta.theta))
        rows.append(
            [
                rec.scale,
                rho,
                rec.log_loss,
                con.log_loss,
                objective_r,
                objective_c,
                distance,
                loss_match,
                objective_match,
            ]
        )
        result.check(
            "F10",
            "θ_r(c) solves the constrained problem at its own norm",
            loss_match,
            detail=f"c={rec.scale!r} logL_r={rec.log_loss!r} logL_c={con.log_loss!r}",
        )
        result.check(
            "F11",
            "regularized objective matches along the constrained path",
            objective_match,
            detail=f"c={rec.scale!r} obj_r={objective_r!r} obj_c={objective_c!r}",
        )
        result.check(
            "F10",
            "directions coincide",
            distance <= 1e-3,
            gating=False,
            detail=f"c={rec.scale!r} distance={distance!r}",
        )
    result.results = (header, rows)
    result.tables["regularization_path.csv"] = reg.to_rows(ds.n_samples, spec.total_dim)
    return result


def run_pareto_check(ctx: ExperimentContext) -> ExperimentResult:
    result = ExperimentResult("pareto_check", ("L1", "L2"))
    ds = ctx.dataset("separable_gaussian", d=2, N=3)
    spec = ctx.spec([{"family": "linear"}], ds.dim)
    opts = ctx.options(ctx.norm("L2"))
    grid = ctx.rho_grid(1.0, 64.0, 8)

    constrained = sweep("constrained", spec, ds, grid, opts)
    ok = constrained.ok_records()
    samples = [(r.scale, r.log_loss) for r in ok]
    directions = [r.theta.theta for r in ok]
    report = pareto_cross_check(samples, tol=1e-4, spec=spec, ds=ds, directions=directions)

    header = ["rho", "log_phi", "decreasing", "swapped_norm", "passed"]
    rows = [
        [p.rho, p.log_phi, p.decreasing, p.swapped_norm if p.swapped_norm is not None else float("nan"), p.passed]
        for p in report.points
    ]
    result.results = (header, rows)
    result.check(
        "L1",
        "φ(ρ) strictly decreasing",
        not report.monotonicity_violated,
        gating=False,
        detail=f"log_phi={[p.log_phi for p in report.points]!r}",
    )
    for p in report.points:
        if p.passed is None:
            continue
        result.check(
            "L1",
            "swapped problem recovers ρ",
            p.passed,
            detail=f"rho={p.rho!r} swapped={p.swapped_norm!r}",
        )
    worst = max((abs(r.theta_norm - 1.0) for r in ok), default=0.0)
    result.check(
        "L2", "constrained solutions have unit norm", worst <= 1e-9, detail=f"worst={worst!r}"
    )
    result.tables["constrained_path.csv"] = constrained.to_rows(ds.n_samples, spec.total_dim)
    return result
