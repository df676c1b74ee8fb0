"""
Projected descent on unit spheres

Retractions, multistart seeding, a backtracking projected-gradient loop and
scipy polishing stages shared by the path solvers.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from margin_paths.errors import AllStartsInfeasible, DomainError
from margin_paths.predictor import Dataset, PredictorSpec, in_domain, jacobian, values
from margin_paths.solvers.records import RunResult, SolverOptions

logger = logging.getLogger("marginpaths.solvers")

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60


#############################################
# Projections
#############################################


def project_simplex(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {x ≥ 0, Σx = radius} by sorting"""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.nonzero(u > (css - radius) / np.arange(1, v.shape[0] + 1))[0][-1]
    shift = (css[idx] - radius) / (idx + 1)
    return np.clip(v - shift, 0.0, None)


def project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    if np.sum(np.abs(v)) <= radius:
        return v
    return np.sign(v) * project_simplex(np.abs(v), radius)


def retract(theta: np.ndarray, norm_tag: str) -> np.ndarray:
    """
    Map onto the unit sphere of norm_tag (ball projection, then scale to the boundary)

    Raises DomainError for the zero vector, which has no direction.
    """
    if norm_tag == "L2":
        scaled, size = theta, float(np.linalg.norm(theta))
    elif norm_tag == "Linf":
        scaled = np.clip(theta, -1.0, 1.0)
        size = float(np.max(np.abs(scaled)))
    elif norm_tag == "L1":
        scaled = project_l1_ball(theta)
        size = float(np.sum(np.abs(scaled)))
    else:
        raise ValueError(f"unknown norm tag {norm_tag!r}")
    if not size > 0:
        raise DomainError(f"cannot retract a zero vector onto the {norm_tag} sphere")
    return scaled / size


def sphere_pg_norm(theta: np.ndarray, g: np.ndarray, norm_tag: str) -> float:
    """Projected-gradient size: tangent component for L2, gradient mapping otherwise"""
    if norm_tag == "L2":
        return float(np.linalg.norm(g - np.dot(g, theta) * theta))
    tau = 1e-4 / max(float(np.linalg.norm(g)), 1e-300)
    return float(np.linalg.norm(theta - retract(theta - tau * g, norm_tag))) / tau


#############################################
# Starts
#############################################


def _centroid_direction(ds: Dataset) -> np.ndarray:
    norms = np.linalg.norm(ds.Z, axis=1, keepdims=True)
    return np.sum(ds.Z / np.where(norms > 0, norms, 1.0), axis=0)


def draw_starts(
    spec: PredictorSpec,
    ds: Dataset,
    opts: SolverOptions,
    count: int,
    stream: int = 0,
    warm_start: Optional[np.ndarray] = None,
) -> List[np.ndarray]:
    """
    Seeded multistart points on the unit sphere

    Log families resample each start until it lies in the feasible cone; starts
    that never do are dropped. Raises AllStartsInfeasible if none survive.
    """
    rng = np.random.default_rng([int(opts.seed), int(stream)])
    starts: List[np.ndarray] = []
    if warm_start is not None:
        starts.append(retract(np.asarray(warm_start, dtype=float), opts.norm_tag))
    if spec.is_log:
        centroid = _centroid_direction(ds)
        if spec.total_dim == ds.dim and np.linalg.norm(centroid) > 0:
            starts.append(retract(centroid, opts.norm_tag))
    for _ in range(count):
        tries = opts.feasibility_resamples if spec.is_log else 1
        for _ in range(tries):
            candidate = retract(rng.standard_normal(spec.total_dim), opts.norm_tag)
            if in_domain(spec, candidate, ds):
                starts.append(candidate)
                break
    starts = [s for s in starts if in_domain(spec, s, ds)]
    if not starts:
        raise AllStartsInfeasible(
            f"no start in the feasible cone after {opts.feasibility_resamples} resamples"
        )
    return starts


#############################################
# Descent
#############################################


def descend(
    objective: Objective,
    theta0: np.ndarray,
    project: Callable[[np.ndarray], np.ndarray],
    pg_norm: Callable[[np.ndarray, np.ndarray], float],
    opts: SolverOptions,
    max_iter: Optional[int] = None,
    pgtol: Optional[float] = None,
) -> RunResult:
    """
    Projected gradient descent with backtracking

    "armijo" doubles the step after each accepted move and halves it until the
    projected sufficient-decrease test holds. "invsqrt" takes normalized steps of
    length η₀/√t and only backtracks when a step leaves the domain.
    """
    max_iter = opts.max_iter if max_iter is None else max_iter
    pgtol = opts.pgtol if pgtol is None else pgtol
    theta = project(np.asarray(theta0, dtype=float))
    value, g = objective(theta)
    step = opts.step0 / max(float(np.linalg.norm(g)), 1e-300)
    pg = pg_norm(theta, g)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if pg <= pgtol * max(1.0, float(np.linalg.norm(g))):
            converged = True
            break
        if opts.step_schedule == "invsqrt":
            step = opts.step0 / np.sqrt(it) / max(float(np.linalg.norm(g)), 1e-300)
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            try:
                candidate = project(theta - step * g)
                cand_value, cand_g = objective(candidate)
            except DomainError:
                step *= 0.5
                continue
            if opts.step_schedule == "invsqrt":
                accepted = True
                break
            if cand_value <= value - ARMIJO_C * float(np.dot(g, theta - candidate)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        theta, value, g = candidate, cand_value, cand_g
        pg = pg_norm(theta, g)
        if opts.step_schedule == "armijo":
            step *= 2.0
    else:
        converged = pg <= pgtol * max(1.0, float(np.linalg.norm(g)))
    return RunResult(
        theta=theta,
        value=float(value),
        iterations=it,
        final_step=float(step),
        pg_norm=float(pg),
        converged=converged,
    )


def polish_sphere(objective: Objective, run: RunResult, norm_tag: str) -> RunResult:
    """
    L-BFGS refinement of a descent run

    L2 runs are polished in the scale-free parametrization θ = u/‖u‖; L∞ runs
    over the box [−1, 1] followed by a retraction. Keeps the better of the two.
    """
    theta0 = run.theta
    offset = run.value

    if norm_tag == "L2":

        def fun(u):
            nu = np.linalg.norm(u)
            th = u / nu
            v, g = objective(th)
            return v - offset, (g - np.dot(g, th) * th) / nu

        bounds = None
    elif norm_tag == "Linf":

        def fun(u):
            v, g = objective(u)
            return v - offset, g

        bounds = [(-1.0, 1.0)] * theta0.shape[0]
    else:
        return run

    gscale = max(1.0, float(np.linalg.norm(objective(theta0)[1])))
    try:
        res = minimize(
            fun,
            theta0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-13 * gscale},
        )
        theta = retract(res.x, norm_tag)
        value, g = objective(theta)
    except (DomainError, FloatingPointError, ValueError) as e:
        logger.debug("Polish skipped: %s", e)
        return run
    if not np.isfinite(value) or value > run.value:
        return run
    pg = sphere_pg_norm(theta, g, norm_tag)
    return RunResult(
        theta=theta,
        value=float(value),
        iterations=run.iterations + int(res.nit),
        final_step=run.final_step,
        pg_norm=pg,
        converged=run.converged or bool(res.success),
    )


def polish_margin(
    spec: PredictorSpec, ds: Dataset, rho: float, theta: np.ndarray, norm_tag: str
) -> np.ndarray:
    """
    SLSQP on max t s.t. f_n(ρθ) ≥ t over the sphere (L2) or box (L∞)

    Returns the polished direction, or the input if it did not improve the
    true minimum margin.
    """
    if norm_tag == "L1":
        return theta
    rho = float(rho)
    f0 = values(spec, rho * theta, ds)
    t0 = float(np.min(f0))
    scale = max(1.0, abs(t0))
    d = theta.shape[0]

    def objective(x):
        g = np.zeros(d + 1)
        g[-1] = -1.0 / scale
        return -x[-1] / scale, g

    def margin_gap(x):
        return (values(spec, rho * x[:-1], ds) - x[-1]) / scale

    def margin_gap_jac(x):
        jac = np.empty((ds.n_samples, d + 1))
        jac[:, :-1] = rho * jacobian(spec, rho * x[:-1], ds) / scale
        jac[:, -1] = -1.0 / scale
        return jac

    constraints = [{"type": "ineq", "fun": margin_gap, "jac": margin_gap_jac}]
    bounds = None
    if norm_tag == "L2":
        constraints.append(
            {
                "type": "eq",
                "fun": lambda x: np.array([np.dot(x[:-1], x[:-1]) - 1.0]),
                "jac": lambda x: np.concatenate([2.0 * x[:-1], [0.0]])[None, :],
            }
        )
    else:
        bounds = [(-1.0, 1.0)] * d + [(None, None)]
    try:
        res = minimize(
            objective,
            np.concatenate([theta, [t0]]),
            jac=True,
            method="SLSQP",
            constraints=constraints,
            bounds=bounds,
            options={"maxiter": 200, "ftol": 1e-15},
        )
        candidate = retract(res.x[:-1], norm_tag)
        if np.min(values(spec, rho * candidate, ds)) > t0:
            return candidate
    except (DomainError, FloatingPointError, ValueError) as e:
        logger.debug("Margin polish skipped: %s", e)
    return theta


#############################################
# Multistart plumbing
#############################################


def parallel_map(fn: Callable, items: Sequence, threads: int) -> List:
    """Order-preserving map over a bounded thread pool"""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cluster_alternates(
    runs: List[RunResult], best: RunResult, loss_tol: float, dir_tol: float
) -> Tuple[np.ndarray, ...]:
    """Representatives of near-optimal runs that land on distinct directions"""
    reps: List[np.ndarray] = [best.theta]
    threshold = best.value + loss_tol * max(1.0, abs(best.value))
    for run in sorted(runs, key=lambda r: r.value):
        if run.value > threshold:
            break
        if all(np.linalg.norm(run.theta - rep) > dir_tol for rep in reps):
            reps.append(run.theta)
    return tuple(reps[1:])
