"""
Sums of homogeneous blocks

Block rescaling w_k = ρ θ_k γ^{-1/α_k}, the limit and finite-γ weighted-norm
problems under f_n(w) ≥ 1, the shallow-discard trajectory and the
squared-bias SVM with its independent bisection oracle.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize

from margin_paths.errors import (
    DimensionTooLarge,
    Infeasible,
    NonPositiveGamma,
    UnsupportedFamily,
)
from margin_paths.predictor import (
    Dataset,
    ParamPoint,
    PredictorSpec,
    as_theta,
    jacobian,
    squared_bias_spec,
    values,
)
from margin_paths.solvers.paths import solve_margin, sweep
from margin_paths.solvers.records import PathRecord, SolverOptions, SweepResult
from margin_paths.solvers.sphere import parallel_map

logger = logging.getLogger("marginpaths.ensemble")

GAMMA_SOURCE = "gamma_star"  # rescaling uses γ*(ρ) from the margin solver
INFEASIBLE_SURROGATE = 1e12


@dataclass(frozen=True)
class EnsembleOptions:
    """Knobs for the penalty solves of the weighted-norm problems"""

    restarts: int = 8
    penalty_exponents: Tuple[int, ...] = tuple(range(9))  # μ = 10^i
    stage_iter: int = 500
    init_scale: float = 1.0
    feas_tol: float = 1e-6
    seed: int = 0
    threads: int = 1
    explore_conjecture: bool = False
    margin_restarts: int = 4
    warm_restarts: int = 2  # random starts added to supplied warm starts


#############################################
# Rescaling
#############################################


@dataclass
class BlockRescaling:
    w_blocks: List[np.ndarray]
    gamma_used: float
    rho_used: float
    degrees: List

    @property
    def w(self) -> np.ndarray:
        return np.concatenate(self.w_blocks)

    @property
    def block_norms(self) -> List[float]:
        return [float(np.linalg.norm(b)) for b in self.w_blocks]


def rescale_blocks(theta, spec: PredictorSpec, rho: float, gamma: float) -> BlockRescaling:
    """w_k = ρ θ_k γ^{-1/α_k} with each block's own degree"""
    if not gamma > 0:
        raise NonPositiveGamma(f"gamma must be positive, got {gamma}")
    if spec.is_log:
        raise UnsupportedFamily("rescaling needs explicit block degrees")
    point = theta if isinstance(theta, ParamPoint) else ParamPoint.for_spec(spec, theta)
    blocks = [
        float(rho) * point.block(k) * float(gamma) ** (-1.0 / float(alpha))
        for k, alpha in enumerate(spec.degrees)
    ]
    return BlockRescaling(
        w_blocks=blocks, gamma_used=float(gamma), rho_used=float(rho), degrees=list(spec.degrees)
    )


#############################################
# Weighted-norm problems under f_n(w) ≥ 1
#############################################


@dataclass
class WeightedNormSolution:
    w: np.ndarray
    w_blocks: List[np.ndarray]
    objective: float  # Σ_k c_k ‖w_k‖² with the unnormalized weights
    w1_norm_sq: float
    min_constraint: float
    converged: bool
    gamma: Optional[float] = None
    conjecture_w2_norm_sq: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.converged


def _split(spec: PredictorSpec, w: np.ndarray) -> List[np.ndarray]:
    return [w[a:b] for a, b in spec.offsets]


def _block_mask(spec: PredictorSpec, weights: Sequence[float]) -> np.ndarray:
    mask = np.zeros(spec.total_dim)
    for (a, b), c in zip(spec.offsets, weights):
        mask[a:b] = c
    return mask


def _penalty_objective(spec, ds, mask, mu, extra=None):
    def objective(w):
        f = values(spec, w, ds)
        short = np.maximum(0.0, 1.0 - f)
        value = float(np.sum(mask * w * w)) + mu * float(np.sum(short**2))
        g = 2.0 * mask * w - 2.0 * mu * (jacobian(spec, w, ds).T @ short)
        if extra is not None:
            ev, eg = extra(w)
            value += mu * ev
            g = g + mu * eg
        return value, g

    return objective


def _scale_to_feasible(spec: PredictorSpec, ds: Dataset, w: np.ndarray) -> Optional[np.ndarray]:
    """Smallest joint scale t ≥ 1 with min_n f_n(t·w) ≥ 1, if any"""

    def gap(t):
        return float(np.min(values(spec, t * w, ds))) - 1.0

    if gap(1.0) >= 0:
        return w
    hi = 2.0
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 2.0**60:
            return None
    t = brentq(gap, 1.0, hi, xtol=1e-14) * (1.0 + 1e-12)
    return t * w


def _feasibility_polish(spec: PredictorSpec, ds: Dataset, w: np.ndarray) -> Optional[np.ndarray]:
    """
    Restore f_n(w) ≥ 1 by scaling the deepest block by s ≥ 0 closest to 1,
    falling back to a joint scale of all blocks
    """
    a, b = spec.offsets[-1]
    alpha = float(spec.degrees[-1])
    deep = w.copy()
    deep[:a] = 0.0
    total = values(spec, w, ds)
    deep_part = values(spec, deep, ds)
    rest = total - deep_part
    lo, hi = 0.0, np.inf
    possible = True
    for r, gn in zip(rest, deep_part):
        need = 1.0 - r
        if gn > 0:
            lo = max(lo, (max(need, 0.0) / gn) ** (1.0 / alpha))
        elif gn < 0:
            if need > 0:
                possible = False
                break
            hi = min(hi, (-need / -gn) ** (1.0 / alpha))
        elif need > 0:
            possible = False
            break
    if possible and lo <= hi:
        s = min(max(1.0, lo), hi)
        candidate = w.copy()
        candidate[a:b] = s * w[a:b]
        if np.min(values(spec, candidate, ds)) >= 1.0 - 1e-12:
            return candidate
    return _scale_to_feasible(spec, ds, w)


def feasible_point(
    spec: PredictorSpec,
    ds: Dataset,
    opts: EnsembleOptions = EnsembleOptions(),
    margin_record: Optional[PathRecord] = None,
) -> np.ndarray:
    """
    A point with min_n f_n ≥ 1, scaled from a positive max-margin solution

    A margin record already solved by the caller is reused; otherwise the
    max-min problem is solved at ρ ∈ {1, 10, 100} until one is positive.
    """
    if margin_record is not None and margin_record.ok and margin_record.min_margin > 0:
        start = _scale_to_feasible(spec, ds, margin_record.scale * margin_record.theta.theta)
        if start is not None:
            return start
    margin_opts = SolverOptions(restarts=opts.margin_restarts, seed=opts.seed, threads=opts.threads)
    for rho in (1.0, 10.0, 100.0):
        record = solve_margin(spec, ds, rho, margin_opts)
        if record.min_margin > 0:
            start = _scale_to_feasible(spec, ds, rho * record.theta.theta)
            if start is not None:
                return start
    raise Infeasible("no w with f_n(w) >= 1 found by the max-min solve")


def _penalty_ladder(spec, ds, mask, w0, opts: EnsembleOptions, extra=None) -> np.ndarray:
    """Raise μ = 10^i until the constraint shortfall is within feas_tol"""
    w = np.array(w0, dtype=float)
    for stage, i in enumerate(opts.penalty_exponents):
        res = minimize(
            _penalty_objective(spec, ds, mask, 10.0**i, extra=extra),
            w,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": opts.stage_iter, "ftol": 1e-15, "gtol": 1e-12},
        )
        w = res.x
        shortfall = 1.0 - float(np.min(values(spec, w, ds)))
        if stage > 0 and shortfall <= opts.feas_tol:
            if extra is None or extra(w)[0] <= opts.feas_tol**2:
                break
    return w


def _solve_weighted(
    spec: PredictorSpec,
    ds: Dataset,
    weights: Sequence[float],
    opts: EnsembleOptions,
    start: Optional[np.ndarray] = None,
    warm: Sequence[np.ndarray] = (),
) -> Tuple[np.ndarray, bool]:
    if spec.is_log:
        raise UnsupportedFamily("weighted-norm problems need homogeneous blocks")
    feasible_start = start if start is not None else feasible_point(spec, ds, opts)
    top = max(weights)
    mask = _block_mask(spec, [c / top for c in weights])
    rng = np.random.default_rng([int(opts.seed), 7])
    count = opts.warm_restarts if len(warm) else opts.restarts
    starts = (
        [feasible_start]
        + [np.asarray(w, dtype=float) for w in warm]
        + [opts.init_scale * rng.standard_normal(spec.total_dim) for _ in range(count)]
    )

    def run_one(w0):
        w = _penalty_ladder(spec, ds, mask, w0, opts)
        polished = _feasibility_polish(spec, ds, w)
        if polished is None:
            return w, np.inf, False
        return polished, float(np.sum(mask * polished * polished)), True

    runs = parallel_map(run_one, starts, opts.threads)
    feasible = [r for r in runs if r[2]]
    if not feasible:
        logger.warning("No restart reached the feasible set")
        best = min(runs, key=lambda r: float(np.min(values(spec, r[0], ds))))
        return best[0], False
    best = min(feasible, key=lambda r: r[1])
    min_f = float(np.min(values(spec, best[0], ds)))
    return best[0], min_f >= 1.0 - opts.feas_tol


def _solution(spec, ds, w, weights, converged, gamma=None) -> WeightedNormSolution:
    blocks = _split(spec, w)
    objective = float(sum(c * np.dot(b, b) for c, b in zip(weights, blocks)))
    return WeightedNormSolution(
        w=w,
        w_blocks=blocks,
        objective=objective,
        w1_norm_sq=float(np.dot(blocks[0], blocks[0])),
        min_constraint=float(np.min(values(spec, w, ds))),
        converged=converged,
        gamma=gamma,
    )


def _second_block_refinement(spec, ds, sol: WeightedNormSolution, opts: EnsembleOptions) -> float:
    """min ‖w₂‖² among points whose ‖w₁‖² stays at the optimum (exploratory)"""
    (a1, b1), (a2, b2) = spec.offsets[0], spec.offsets[1]
    cap = sol.w1_norm_sq + 1e-6 * max(1.0, sol.w1_norm_sq)
    mask = np.zeros(spec.total_dim)
    mask[a2:b2] = 1.0

    def keep_first(w):
        excess = max(0.0, float(np.dot(w[a1:b1], w[a1:b1])) - cap)
        g = np.zeros_like(w)
        g[a1:b1] = 4.0 * excess * w[a1:b1]
        return excess**2, g

    w = _penalty_ladder(spec, ds, mask, sol.w, opts, extra=keep_first)
    return float(np.dot(w[a2:b2], w[a2:b2]))


def limit_problem_solve(
    spec: PredictorSpec,
    ds: Dataset,
    opts: EnsembleOptions = EnsembleOptions(),
    start: Optional[np.ndarray] = None,
) -> WeightedNormSolution:
    """
    min ‖w₁‖² s.t. f_n(w) ≥ 1 for all n

    Exterior quadratic penalty with μ = 10^i, multistart, then a polish that
    scales the deepest block back onto the feasible set. `start` is a
    feasible point from feasible_point(); it is computed when omitted.
    """
    weights = [1.0] + [0.0] * (len(spec.blocks) - 1)
    w, converged = _solve_weighted(spec, ds, weights, opts, start=start)
    sol = _solution(spec, ds, w, weights, converged)
    if not converged:
        logger.warning("Limit problem did not converge (min f = %.6g)", sol.min_constraint)
    if opts.explore_conjecture and len(spec.blocks) >= 2:
        sol.conjecture_w2_norm_sq = _second_block_refinement(spec, ds, sol, opts)
    return sol


def finite_gamma_solve(
    spec: PredictorSpec,
    ds: Dataset,
    gamma: float,
    opts: EnsembleOptions = EnsembleOptions(),
    start: Optional[np.ndarray] = None,
    warm: Sequence[np.ndarray] = (),
) -> WeightedNormSolution:
    """
    min Σ_k γ^{2/α_k} ‖w_k‖² s.t. f_n(w) ≥ 1 for all n

    Solutions at neighbouring γ passed as `warm` replace most random starts.
    """
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    if spec.is_log:
        raise UnsupportedFamily("finite-gamma problem needs explicit block degrees")
    weights = [float(gamma) ** (2.0 / float(alpha)) for alpha in spec.degrees]
    w, converged = _solve_weighted(spec, ds, weights, opts, start=start, warm=warm)
    return _solution(spec, ds, w, weights, converged, gamma=float(gamma))


@dataclass
class BruteForceResult:
    w: np.ndarray
    w1_norm_sq: float
    resolution: float
    feasible_points: int


def limit_problem_bruteforce(
    spec: PredictorSpec,
    ds: Dataset,
    box: float = 3.0,
    resolution: Optional[float] = None,
) -> BruteForceResult:
    """
    Dense grid over [-box, box]^D keeping points with min_n f_n(w) ≥ 1

    The default step is 1/300 for D ≤ 2 and 1/20 for D = 3, so integer
    coordinates lie on the grid.
    """
    dim = spec.total_dim
    if dim > 3:
        raise DimensionTooLarge(f"brute-force limit problem supports total_dim <= 3, got {dim}")
    if resolution is None:
        resolution = 1.0 / 300.0 if dim <= 2 else 1.0 / 20.0
    count = int(round(2.0 * box / resolution)) + 1
    axis = np.linspace(-box, box, count)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    a, b = spec.offsets[0]
    best_val, best_w, feasible_total = np.inf, None, 0
    for start in range(0, points.shape[0], 500_000):
        chunk = points[start : start + 500_000]
        ok = np.min(values(spec, chunk, ds), axis=1) >= 1.0 - 1e-12
        feasible_total += int(np.count_nonzero(ok))
        if not np.any(ok):
            continue
        cand = chunk[ok]
        norms = np.sum(cand[:, a:b] ** 2, axis=1)
        idx = int(np.argmin(norms))
        if norms[idx] < best_val:
            best_val, best_w = float(norms[idx]), cand[idx]
    if best_w is None:
        raise Infeasible(f"no feasible grid point in the box of half-width {box}")
    return BruteForceResult(
        w=best_w, w1_norm_sq=best_val, resolution=float(resolution), feasible_points=feasible_total
    )


#############################################
# Shallow discard
#############################################


@dataclass
class DiscardRow:
    rho: float
    gamma_star: float
    block_norms: Tuple[float, ...]
    note: str = ""


def shallow_discard_metric(
    constrained: SweepResult,
    spec: PredictorSpec,
    gamma_stars: Optional[Sequence[float]] = None,
) -> List[DiscardRow]:
    """
    Rescaled block norms ‖w_k(ρ)‖ along a constrained sweep

    Args:
        constrained: Sweep over a homogeneous-sum spec
        gamma_stars: γ*(ρ) per ok record; without them γ(ρ, θ_c(ρ)) is used

    Returns:
        One row per ok record; records with γ ≤ 0 get NaN norms and a note
    """
    rows: List[DiscardRow] = []
    for i, record in enumerate(constrained.ok_records()):
        gamma = float(gamma_stars[i]) if gamma_stars is not None else record.min_margin
        try:
            scaled = rescale_blocks(record.theta, spec, record.scale, gamma)
        except NonPositiveGamma:
            logger.info("Skipping rho=%g: non-positive gamma %.6g", record.scale, gamma)
            rows.append(
                DiscardRow(
                    rho=record.scale,
                    gamma_star=gamma,
                    block_norms=tuple([float("nan")] * len(spec.blocks)),
                    note="excluded: gamma <= 0",
                )
            )
            continue
        rows.append(
            DiscardRow(rho=record.scale, gamma_star=gamma, block_norms=tuple(scaled.block_norms))
        )
    return rows


#############################################
# Squared-bias SVM
#############################################


def _min_norm_at_bias(ds: Dataset, beta: float) -> Tuple[float, Optional[np.ndarray]]:
    """min ‖w‖² s.t. y_n(wᵀx_n + β) ≥ 1"""
    rhs = 1.0 - ds.y * beta
    if np.all(rhs <= 0):
        return 0.0, np.zeros(ds.dim)
    start = np.linalg.lstsq(ds.Z, np.maximum(rhs, 0.0), rcond=None)[0]
    res = minimize(
        lambda w: (float(np.dot(w, w)), 2.0 * w),
        start,
        jac=True,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": lambda w: ds.Z @ w - rhs, "jac": lambda w: ds.Z}],
        options={"maxiter": 500, "ftol": 1e-15},
    )
    if np.min(ds.Z @ res.x - rhs) < -1e-8:
        return np.inf, None
    return float(np.dot(res.x, res.x)), res.x


def svm_bias_oracle(
    ds: Dataset, beta_cap: float = 2.0**40, tol: float = 1e-10
) -> Tuple[np.ndarray, float]:
    """
    min ‖w‖² s.t. y_n(wᵀx_n + β) ≥ 1 over β ≥ 0

    h(β) = min ‖w‖² at fixed β is convex and its feasible set is an interval.
    A doubling search finds a feasible β past the minimum, then bisection on
    the sign of the forward difference of h shrinks [lo, hi] to tol. The
    inner problem is a small QP.
    """

    def h(beta):
        value, _ = _min_norm_at_bias(ds, beta)
        return value if np.isfinite(value) else INFEASIBLE_SURROGATE

    hi = 1.0
    while (h(hi) >= INFEASIBLE_SURROGATE or h(2.0 * hi) < h(hi)) and hi < beta_cap:
        hi *= 2.0
    if h(hi) >= INFEASIBLE_SURROGATE:
        # the feasible interval may lie below 1
        below = [0.5**k for k in range(1, 41)] + [0.0]
        hi = next((b for b in below if h(b) < INFEASIBLE_SURROGATE), None)
        if hi is None:
            raise Infeasible("no (w, beta >= 0) satisfies the bias constraints")
    anchor = hi  # feasible; the feasible β form an interval around it
    lo, hi = 0.0, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        here = h(mid)
        if here >= INFEASIBLE_SURROGATE:
            lo, hi = (mid, hi) if mid < anchor else (lo, mid)
            continue
        step = max(tol, 1e-9 * mid)
        if h(mid + step) < here:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    if h(0.0) <= h(beta):
        beta = 0.0
    value, w = _min_norm_at_bias(ds, beta)
    if w is None:
        raise Infeasible("no (w, beta >= 0) satisfies the bias constraints")
    return w, beta


def regularized_bias_svm(ds: Dataset) -> Tuple[np.ndarray, float]:
    """Hard-margin SVM with the bias in the norm: min ‖w‖² + b² s.t. y_n(wᵀx_n + b) ≥ 1"""
    aug = np.hstack([ds.Z, ds.y[:, None]])
    start = np.linalg.lstsq(aug, np.ones(ds.n_samples), rcond=None)[0]
    res = minimize(
        lambda v: (float(np.dot(v, v)), 2.0 * v),
        start,
        jac=True,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": lambda v: aug @ v - 1.0, "jac": lambda v: aug}],
        options={"maxiter": 500, "ftol": 1e-15},
    )
    if np.min(aug @ res.x - 1.0) < -1e-8:
        raise Infeasible("augmented-feature SVM is infeasible")
    return res.x[:-1], float(res.x[-1])


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


@dataclass
class SvmBiasResult:
    theta1: np.ndarray  # linear block of θ_c(ρ_max)
    b: float  # canonical b ≥ 0
    rho: float
    gamma_star: float
    w1: np.ndarray  # rescaled linear block
    beta: float  # rescaled b²
    oracle_w: np.ndarray
    oracle_beta: float
    oracle_gap: float
    constrained: SweepResult = field(repr=False, default=None)

    @property
    def artifact_vector(self) -> np.ndarray:
        return np.append(self.w1, self.beta)

    @property
    def oracle_vector(self) -> np.ndarray:
        return np.append(self.oracle_w, self.oracle_beta)


def svm_bias_solve(
    ds: Dataset,
    opts: SolverOptions = SolverOptions(),
    rho_grid: Optional[Sequence[float]] = None,
) -> SvmBiasResult:
    """
    Constrained sweep on [Linear, SquaredBias], rescaled at the largest ρ and
    compared against the β ≥ 0 oracle by direction distance of (w, β)
    """
    spec = squared_bias_spec(ds.dim)
    grid = list(rho_grid) if rho_grid is not None else list(np.geomspace(1.0, 1024.0, 11))
    path = sweep("constrained", spec, ds, grid, opts)
    ok = path.ok_records()
    if not ok:
        raise Infeasible("constrained sweep produced no solution")
    last = ok[-1]
    margin = solve_margin(spec, ds, last.scale, opts, warm_start=last.theta.theta)
    gamma = margin.min_margin
    if gamma <= 0:
        raise Infeasible(f"max-margin at rho={last.scale:g} is {gamma:.6g}")
    scaled = rescale_blocks(last.theta, spec, last.scale, gamma)
    w1, wb = scaled.w_blocks
    beta = float(wb[0] ** 2)
    oracle_w, oracle_beta = svm_bias_oracle(ds)
    gap = float(
        np.linalg.norm(_unit(np.append(w1, beta)) - _unit(np.append(oracle_w, oracle_beta)))
    )
    logger.info("Squared-bias SVM: beta=%.6g oracle beta=%.6g gap=%.3e", beta, oracle_beta, gap)
    theta = as_theta(last.theta.theta)
    return SvmBiasResult(
        theta1=theta[:-1],
        b=abs(float(theta[-1])),
        rho=last.scale,
        gamma_star=gamma,
        w1=w1,
        beta=beta,
        oracle_w=oracle_w,
        oracle_beta=oracle_beta,
        oracle_gap=gap,
        constrained=path,
    )
