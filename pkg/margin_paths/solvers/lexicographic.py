"""
Lexicographic max-margin chain

Level 1 maximizes the smallest margin, level 2 the second-smallest among the
level-1 maximizers, and so on up to level N.
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp, softmax

from margin_paths.errors import ResolutionTooCoarse, UnsupportedFamily
from margin_paths.predictor import Dataset, PredictorSpec, jacobian, values
from margin_paths.solvers.oracle import grid_oracle
from margin_paths.solvers.paths import solve_margin
from margin_paths.solvers.records import SolverOptions
from margin_paths.solvers.sphere import descend, retract, sphere_pg_norm

logger = logging.getLogger("marginpaths.lexicographic")

LOCK_PENALTY = 1e6


@dataclass
class LexLevel:
    level: int
    margin_value: float  # best level-th sorted margin among the survivors
    representative: np.ndarray
    survivors: np.ndarray  # (M, d) points of the level set
    certified: bool

    @property
    def description(self) -> str:
        if self.survivors.shape[0] == 1:
            return f"single point {np.round(self.survivors[0], 6).tolist()}"
        lo = np.round(self.survivors.min(axis=0), 6).tolist()
        hi = np.round(self.survivors.max(axis=0), 6).tolist()
        return f"{self.survivors.shape[0]} grid points in box {lo}..{hi}"

    def distance_to(self, theta: np.ndarray) -> float:
        return float(np.min(np.linalg.norm(self.survivors - theta, axis=1)))


def lexicographic_solve(
    spec: PredictorSpec,
    ds: Dataset,
    opts: SolverOptions = SolverOptions(),
    mode: str = "certified",
    grid_res: float = 1e-3,
    level_tol: Optional[float] = None,
) -> List[LexLevel]:
    """
    Build the chain Θ*_{m,1} ⊇ Θ*_{m,2} ⊇ … ⊇ Θ*_{m,N}

    Args:
        mode: "certified" filters the grid-oracle landscape (total_dim <= 3);
            "heuristic" runs penalized smoothed maximizations in any dimension
        grid_res: Oracle resolution for certified mode
        level_tol: Slack per level; defaults to the oracle's discretization slack

    Returns:
        One LexLevel per level k = 1..N
    """
    if not spec.homogeneous:
        raise UnsupportedFamily("lexicographic chain needs a homogeneous spec")
    if mode == "certified":
        return _certified_chain(spec, ds, opts.norm_tag, grid_res, level_tol)
    if mode == "heuristic":
        return _heuristic_chain(spec, ds, opts)
    raise ValueError(f"mode must be 'certified' or 'heuristic', got {mode!r}")


def _certified_chain(spec, ds, norm_tag, grid_res, level_tol) -> List[LexLevel]:
    oracle = grid_oracle(spec, ds, norm_tag, grid_res, slack=level_tol)
    ranked = np.sort(oracle.margins, axis=1)
    mask = np.ones(oracle.points.shape[0], dtype=bool)
    chain: List[LexLevel] = []
    for k in range(ds.n_samples):
        column = ranked[:, k]
        best = float(np.max(column[mask]))
        narrowed = mask & (column >= best - oracle.slack)
        if not np.any(narrowed):
            raise ResolutionTooCoarse(f"level {k + 1} survivor set is empty")
        mask = narrowed
        idx = np.flatnonzero(mask)
        rep = oracle.points[idx[np.argmax(column[idx])]]
        chain.append(
            LexLevel(
                level=k + 1,
                margin_value=best,
                representative=rep,
                survivors=oracle.points[idx],
                certified=True,
            )
        )
        logger.debug("Level %d: value %.6g, %d survivors", k + 1, best, idx.shape[0])
    return chain


def _heuristic_chain(spec, ds, opts: SolverOptions) -> List[LexLevel]:
    first = solve_margin(spec, ds, 1.0, opts)
    theta = first.theta.theta
    chain = [
        LexLevel(
            level=1,
            margin_value=first.min_margin,
            representative=theta,
            survivors=theta[None, :],
            certified=False,
        )
    ]
    stage_opts = replace(opts, step_schedule="armijo")
    for k in range(1, ds.n_samples):
        f = values(spec, theta, ds)
        perm = np.argsort(f, kind="stable")
        head, tail = perm[:k], perm[k:]
        locked = f[head]
        beta = 1e3 / max(1.0, float(np.max(np.abs(f))))

        def objective(th, head=head, tail=tail, locked=locked, beta=beta):
            fv = values(spec, th, ds)
            jac = jacobian(spec, th, ds)
            smooth = float(logsumexp(-beta * fv[tail])) / beta
            weights = softmax(-beta * fv[tail])
            shortfall = np.maximum(0.0, locked - fv[head])
            value = smooth + LOCK_PENALTY * float(np.sum(shortfall**2))
            g = -(jac[tail].T @ weights) - 2.0 * LOCK_PENALTY * (jac[head].T @ shortfall)
            return value, g

        run = descend(
            objective,
            theta,
            lambda th: retract(th, opts.norm_tag),
            lambda th, g: sphere_pg_norm(th, g, opts.norm_tag),
            stage_opts,
            max_iter=opts.max_iter,
            pgtol=max(opts.pgtol, 1e-8),
        )
        theta = run.theta
        level_value = float(np.sort(values(spec, theta, ds))[k])
        chain.append(
            LexLevel(
                level=k + 1,
                margin_value=level_value,
                representative=theta,
                survivors=theta[None, :],
                certified=False,
            )
        )
    return chain
