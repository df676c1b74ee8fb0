"""
Constrained, margin, regularization and optimization paths
"""
import logging
from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from margin_paths.errors import DomainError, MarginPathsError
from margin_paths.loss_margin import exp_loss, log_loss_and_grad, margin_profile
from margin_paths.predictor import (
    Dataset,
    ParamPoint,
    PredictorSpec,
    as_theta,
    in_domain,
    jacobian,
    values,
)
from margin_paths.solvers.records import PathRecord, RunResult, SolverOptions, SweepResult
from margin_paths.solvers.sphere import (
    cluster_alternates,
    descend,
    draw_starts,
    parallel_map,
    polish_margin,
    polish_sphere,
    retract,
    sphere_pg_norm,
)

logger = logging.getLogger("marginpaths.solvers")


def _start_count(opts: SolverOptions, warm_start) -> int:
    return opts.restarts if warm_start is None else opts.sweep_restarts


def _record(
    kind: str,
    scale: float,
    spec: PredictorSpec,
    ds: Dataset,
    rho: float,
    best: RunResult,
    runs: List[RunResult],
    opts: SolverOptions,
    alternates=(),
) -> PathRecord:
    theta = ParamPoint.for_spec(spec, best.theta, opts.norm_tag)
    if not best.converged:
        logger.debug("%s solve at scale %g stopped before pgtol (pg=%.3e)", kind, scale, best.pg_norm)
    return PathRecord(
        kind=kind,
        scale=float(scale),
        theta=theta,
        log_loss=exp_loss(spec, best.theta, rho, ds)[0],
        profile=margin_profile(spec, best.theta, rho, ds),
        restarts_used=len(runs),
        iterations=best.iterations,
        final_step=best.final_step,
        projected_grad_norm=best.pg_norm,
        converged=best.converged,
        theta_norm=theta.norm(),
        alternates=alternates,
    )


#############################################
# Constrained path
#############################################


def solve_constrained(
    spec: PredictorSpec,
    ds: Dataset,
    rho: float,
    opts: SolverOptions = SolverOptions(),
    warm_start: Optional[np.ndarray] = None,
    stream: int = 0,
) -> PathRecord:
    """
    Minimize log ℒ(ρθ) over the unit sphere of opts.norm_tag

    Best of a seeded multistart; each run is projected gradient descent followed
    by an L-BFGS polish for smooth specs.

    Returns:
        PathRecord of kind "constrained" for the lowest-loss run
    """
    if rho <= 0:
        raise ValueError("rho must be positive")

    def objective(theta):
        return log_loss_and_grad(spec, theta, rho, ds)

    starts = draw_starts(spec, ds, opts, _start_count(opts, warm_start), stream, warm_start)

    def run_one(theta0):
        run = descend(
            objective,
            theta0,
            lambda th: retract(th, opts.norm_tag),
            lambda th, g: sphere_pg_norm(th, g, opts.norm_tag),
            opts,
        )
        if opts.polish and not spec.is_log:
            run = polish_sphere(objective, run, opts.norm_tag)
        return run

    runs = parallel_map(run_one, starts, opts.threads)
    best = min(runs, key=lambda r: r.value)
    alternates = cluster_alternates(runs, best, opts.dedup_loss_tol, opts.dedup_dir_tol)
    return _record("constrained", rho, spec, ds, rho, best, runs, opts, alternates)


#############################################
# Margin path
#############################################


def beta_schedule(opts: SolverOptions, n_samples: int, gamma_scale: float) -> List[float]:
    """Base temperatures, extended ×10 until (log N)/β reaches the target error"""
    betas = list(opts.beta_schedule)
    target = opts.margin_eps * max(1.0, abs(gamma_scale))
    if n_samples > 1:
        while betas[-1] < np.log(n_samples) / target:
            betas.append(betas[-1] * 10.0)
    return betas


def solve_margin(
    spec: PredictorSpec,
    ds: Dataset,
    rho: float,
    opts: SolverOptions = SolverOptions(),
    warm_start: Optional[np.ndarray] = None,
    stream: int = 0,
) -> PathRecord:
    """
    Maximize min_n f_n(ρθ) over the unit sphere

    Continuation over the soft-min temperature β, warm-starting each stage, then
    an SLSQP polish of the epigraph form. Restarts are ranked by the true
    minimum margin of their final iterate.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    starts = draw_starts(spec, ds, opts, _start_count(opts, warm_start), stream, warm_start)
    stage_pgtol = max(opts.pgtol, 1e-6)

    def run_one(theta0):
        theta = theta0
        total_iter, run = 0, None
        gamma_scale = float(np.min(values(spec, rho * theta, ds)))
        for beta in beta_schedule(opts, ds.n_samples, gamma_scale):

            def objective(th, beta=beta):
                return log_loss_and_grad(spec, th, rho, ds, beta=beta)

            run = descend(
                objective,
                theta,
                lambda th: retract(th, opts.norm_tag),
                lambda th, g: sphere_pg_norm(th, g, opts.norm_tag),
                opts,
                max_iter=opts.stage_iter,
                pgtol=stage_pgtol,
            )
            theta = run.theta
            total_iter += run.iterations
        if opts.polish:
            theta = polish_margin(spec, ds, rho, theta, opts.norm_tag)
        true_min = float(np.min(values(spec, rho * theta, ds)))
        return RunResult(
            theta=theta,
            value=-true_min,
            iterations=total_iter,
            final_step=run.final_step,
            pg_norm=run.pg_norm,
            converged=run.converged,
        )

    runs = parallel_map(run_one, starts, opts.threads)
    best = min(runs, key=lambda r: r.value)
    alternates = cluster_alternates(runs, best, opts.dedup_loss_tol, opts.dedup_dir_tol)
    return _record("margin", rho, spec, ds, rho, best, runs, opts, alternates)


#############################################
# Sweeps
#############################################


def _check_grid(grid: Sequence[float]):
    grid = [float(s) for s in grid]
    if not grid:
        raise ValueError("scale grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("scale grid must be strictly increasing")
    if grid[0] <= 0:
        raise ValueError("scale grid must be positive")
    return grid


def sweep(
    kind: str,
    spec: PredictorSpec,
    ds: Dataset,
    scale_grid: Sequence[float],
    opts: SolverOptions = SolverOptions(),
    warm_start: Optional[np.ndarray] = None,
) -> SweepResult:
    """
    Solve a path over a strictly increasing grid

    Each point warm-starts from the previous solution plus opts.sweep_restarts
    fresh starts. Solver errors become per-record statuses.
    """
    if kind == "regularization":
        return regularization_path(spec, ds, scale_grid, opts)
    solvers = {"constrained": solve_constrained, "margin": solve_margin}
    if kind not in solvers:
        raise ValueError(f"sweep kind must be one of {sorted(solvers) + ['regularization']}")
    grid = _check_grid(scale_grid)
    solve = solvers[kind]
    warm = warm_start
    records = []
    for idx, scale in enumerate(grid):
        try:
            record = solve(spec, ds, scale, opts, warm_start=warm, stream=idx)
            warm = record.theta.theta
        except MarginPathsError as e:
            logger.warning("%s sweep point rho=%g failed: %s", kind, scale, e)
            record = PathRecord.failed(kind, scale, f"{type(e).__name__}: {e}")
        records.append(record)
    result = SweepResult(
        kind=kind,
        records=records,
        dataset_ref=ds.name,
        spec_ref=spec.describe(),
        norm_tag=opts.norm_tag,
        rng_seed=opts.seed,
    )
    logger.info(
        "%s sweep: %d points, loss decreasing=%s, margin increasing=%s",
        kind,
        len(records),
        result.loss_strictly_decreasing,
        result.margin_strictly_increasing,
    )
    return result


#############################################
# Optimization path
#############################################


def checkpoint_schedule(T: int, count: int = 120) -> List[int]:
    """Geometric checkpoints in [1, T], always ending at T"""
    points = np.unique(np.round(np.geomspace(1, T, num=max(1, min(count, T)))).astype(int))
    out = sorted(set(int(p) for p in points) | {int(T)})
    return out


def optimization_path(
    spec: PredictorSpec,
    ds: Dataset,
    theta0,
    eta_schedule: Union[float, Callable[[int], float]],
    T: int,
    checkpoints: int = 120,
) -> SweepResult:
    """
    Gradient descent θ(t) = θ(t−1) − η_t ∇ℒ(θ(t−1)) on the unscaled loss

    Records are taken at geometric checkpoints; theta is stored unnormalized,
    profile holds the margins of θ̄(t) at scale ‖θ(t)‖ (that is, of θ(t) itself).
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    theta = np.array(as_theta(theta0), dtype=float)
    if not in_domain(spec, theta, ds):
        raise DomainError("theta0 outside the feasible cone")
    eta_at = eta_schedule if callable(eta_schedule) else (lambda t: float(eta_schedule))
    marks = set(checkpoint_schedule(T, checkpoints))

    records: List[PathRecord] = []
    rising, diverged = 0, False
    last_loss = np.inf
    for t in range(1, T + 1):
        f = values(spec, theta, ds)
        g = -(jacobian(spec, theta, ds).T @ np.exp(-f))
        eta = eta_at(t)
        candidate = theta - eta * g
        halvings = 0
        while not in_domain(spec, candidate, ds) and halvings < 60:
            eta *= 0.5
            candidate = theta - eta * g
            halvings += 1
        theta = candidate
        if t in marks:
            log_loss = float(logsumexp(-values(spec, theta, ds)))
            norm = float(np.linalg.norm(theta))
            if not np.isfinite(log_loss):
                diverged = True
                logger.warning("Optimization path produced a non-finite loss at t=%d", t)
                break
            direction = theta / norm if norm > 0 else theta
            records.append(
                PathRecord(
                    kind="optimization",
                    scale=float(t),
                    theta=ParamPoint.for_spec(spec, theta.copy(), "L2"),
                    log_loss=log_loss,
                    profile=margin_profile(spec, direction, norm if norm > 0 else 1.0, ds),
                    iterations=t,
                    final_step=float(eta),
                    projected_grad_norm=float(np.linalg.norm(g)),
                    theta_norm=norm,
                )
            )
            rising = rising + 1 if log_loss > last_loss else 0
            last_loss = log_loss
            if rising >= 50:
                diverged = True
    result = SweepResult(
        kind="optimization",
        records=records,
        dataset_ref=ds.name,
        spec_ref=spec.describe(),
        norm_tag="L2",
        rng_seed=-1,
        diverged=diverged,
    )
    if diverged:
        logger.warning("Optimization path flagged as divergent")
    return result


#############################################
# Regularization path
#############################################


def _regularized_objective(spec: PredictorSpec, ds: Dataset, c: float):
    def objective(theta):
        f = values(spec, theta, ds)
        weights = np.exp(-f)
        value = float(np.sum(weights)) + float(np.dot(theta, theta)) / c
        g = -(jacobian(spec, theta, ds).T @ weights) + 2.0 * theta / c
        return value, g

    return objective


def regularization_path(
    spec: PredictorSpec,
    ds: Dataset,
    c_grid: Sequence[float],
    opts: SolverOptions = SolverOptions(),
) -> SweepResult:
    """
    Minimize ℒ(θ) + (1/c)‖θ‖² for each c (L2 only)

    Records hold the normalized direction; theta_norm is ‖θ_r(c)‖ and the
    margin profile is taken at that scale.
    """
    if opts.norm_tag != "L2":
        raise ValueError("regularization path is defined for the L2 norm only")
    grid = _check_grid(c_grid)
    records: List[PathRecord] = []
    warm: Optional[np.ndarray] = None
    for idx, c in enumerate(grid):
        try:
            record, warm = _solve_regularized(spec, ds, c, opts, warm, idx)
        except MarginPathsError as e:
            logger.warning("regularization point c=%g failed: %s", c, e)
            record = PathRecord.failed("regularization", c, f"{type(e).__name__}: {e}")
        records.append(record)
    return SweepResult(
        kind="regularization",
        records=records,
        dataset_ref=ds.name,
        spec_ref=spec.describe(),
        norm_tag="L2",
        rng_seed=opts.seed,
    )


def _solve_regularized(spec, ds, c, opts, warm, stream):
    objective = _regularized_objective(spec, ds, c)
    scale = 1.0 + np.log1p(c)
    directions = draw_starts(
        spec, ds, replace(opts, norm_tag="L2"), _start_count(opts, warm), stream, None
    )
    starts = ([warm] if warm is not None else []) + [scale * d for d in directions]

    def run_one(theta0):
        run = descend(
            objective,
            theta0,
            lambda th: th,
            lambda th, g: float(np.linalg.norm(g)),
            opts,
        )
        if not opts.polish or spec.is_log:
            return run
        try:
            res = minimize(
                objective,
                run.theta,
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": 1000, "ftol": 1e-15, "gtol": 1e-13},
            )
        except DomainError:
            return run
        value, g = objective(res.x)
        if value > run.value:
            return run
        return RunResult(
            theta=res.x,
            value=value,
            iterations=run.iterations + int(res.nit),
            final_step=run.final_step,
            pg_norm=float(np.linalg.norm(g)),
            converged=run.converged or bool(res.success),
        )

    runs = parallel_map(run_one, starts, opts.threads)
    best = min(runs, key=lambda r: r.value)
    norm = float(np.linalg.norm(best.theta))
    direction = best.theta / norm
    record = PathRecord(
        kind="regularization",
        scale=float(c),
        theta=ParamPoint.for_spec(spec, direction, "L2"),
        log_loss=exp_loss(spec, direction, norm, ds)[0],
        profile=margin_profile(spec, direction, norm, ds),
        restarts_used=len(runs),
        iterations=best.iterations,
        final_step=best.final_step,
        projected_grad_norm=best.pg_norm,
        converged=best.converged,
        theta_norm=norm,
    )
    return record, best.theta
