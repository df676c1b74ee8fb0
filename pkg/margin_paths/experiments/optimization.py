"""
Gradient descent on the unscaled exponential loss

The normalized iterate converges to a KKT point of the margin problem and is
directionally aligned with −∇ℒ, that is, a constrained stationary point at
ρ = ‖θ(t)‖.
"""
import logging

import numpy as np

from margin_paths.experiments.base import ExperimentContext, ExperimentResult
from margin_paths.solvers import optimization_path, solve_margin
from margin_paths.stationarity import (
    alignment_series,
    constrained_stationarity,
    kkt_margin_check,
    licq_check,
)

logger = logging.getLogger("marginpaths.experiments")

DEFAULT_T = 100_000
DEFAULT_LR = 0.5
PERTURBATION = 1e-2


def run_optimization_alignment(ctx: ExperimentContext) -> ExperimentResult:
    result = ExperimentResult("optimization_alignment", ("T2", "T3"))
    ds = ctx.dataset("symmetric_pair")
    spec = ctx.spec([{"family": "linear"}], ds.dim)
    opts = ctx.options(ctx.norm("L2"))
    grids = ctx.config.grids
    T = grids.T or DEFAULT_T
    lr = grids.lr or DEFAULT_LR

    rng = np.random.default_rng(ctx.seed)
    theta0 = 0.1 * np.ones(spec.total_dim) + PERTURBATION * rng.standard_normal(spec.total_dim)
    logger.info("Running gradient descent: T=%d lr=%g", T, lr)
    run = optimization_path(spec, ds, theta0, lr, T, checkpoints=grids.checkpoints)
    result.tables["optimization_path.csv"] = run.to_rows(ds.n_samples, spec.total_dim)
    if run.diverged or not run.records:
        result.check("T2", "gradient descent converged", False, detail="divergent run")
        return result

    final = run.records[-1]
    theta_t = final.theta.theta
    norm_t = float(np.linalg.norm(theta_t))
    theta_bar = theta_t / norm_t

    best = solve_margin(spec, ds, 1.0, opts)
    gamma_star = best.min_margin
    support_tol = 1e-3 * max(1.0, abs(gamma_star))
    kkt = kkt_margin_check(
        spec, theta_bar, ds, gamma_star, tol_p=1e-4, tol_s=1e-4, support_tol=support_tol
    )
    result.check(
        "T2",
        "normalized iterate is a KKT point of the margin problem",
        kkt.passed,
        detail=(
            f"primal={kkt.primal_residual!r} stationarity={kkt.stationarity_residual!r} "
            f"support={list(kkt.support.indices)}"
        ),
    )
    licq = licq_check(spec, theta_bar, ds, support_tol=support_tol, gamma_star=gamma_star)
    result.check(
        "T2", "LICQ holds at the limit", licq.sigma_min >= 0.5, detail=f"sigma_min={licq.sigma_min!r}"
    )
    document = kkt.to_dict()
    document.update(
        {
            "T": T,
            "lr": lr,
            "theta_norm": norm_t,
            "theta_bar": theta_bar,
            "licq_sigma_min": licq.sigma_min,
            "margin_solver_direction": best.theta.theta,
        }
    )
    result.documents["kkt_report.json"] = document

    stationarity = constrained_stationarity(spec, theta_bar, norm_t, ds)
    result.check(
        "T3",
        "θ(T)/‖θ(T)‖ aligned with −∇ℒ at ρ = ‖θ(T)‖",
        stationarity.alignment_residual <= 1e-3,
        detail=f"residual={stationarity.alignment_residual!r}",
    )
    series = alignment_series(run, spec, ds)
    result.tables["alignment.csv"] = (
        ["t", "cosine", "residual"],
        [list(p) for p in series.points],
    )
    result.check(
        "T3",
        "directionally stationary along the run",
        bool(series.verdict),
        detail=f"final residual={series.final_residual!r}",
    )
    result.notes.append(series.note)

    header = ["t", "theta_norm", "log_loss", "min_margin_over_norm", "alignment_residual"]
    rows = []
    for record, point in zip(run.ok_records(), series.points):
        rows.append(
            [
                int(record.scale),
                record.theta_norm,
                record.log_loss,
                record.min_margin / record.theta_norm if record.theta_norm > 0 else float("nan"),
                point[2],
            ]
        )
    result.results = (header, rows)
    result.metrics.update({"gamma_star": gamma_star, "final_theta_norm": norm_t})
    return result
