"""
Solver options and path records
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from margin_paths.loss_margin import MarginProfile
from margin_paths.predictor import ParamPoint

KINDS = ("constrained", "margin", "regularization", "optimization")


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by the sphere solvers"""

    norm_tag: str = "L2"
    restarts: int = 16
    sweep_restarts: int = 4  # fresh restarts per grid point once a warm start exists
    max_iter: int = 2000
    pgtol: float = 1e-9  # relative to max(1, ‖∇‖)
    step_schedule: str = "armijo"  # "armijo" or "invsqrt" (η₀/√t, normalized)
    step0: float = 0.5
    seed: int = 0
    threads: int = 1
    polish: bool = True
    margin_eps: float = 1e-6  # target smoothing error, relative to max(1, |γ|)
    beta_schedule: Tuple[float, ...] = (1.0, 10.0, 100.0, 1000.0)
    stage_iter: int = 300
    dedup_loss_tol: float = 1e-4
    dedup_dir_tol: float = 1e-3
    feasibility_resamples: int = 100

    def fingerprint(self) -> str:
        """Short stable hash used in CSV provenance headers"""
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class RunResult:
    """Outcome of one descent run from one start"""

    theta: np.ndarray
    value: float
    iterations: int
    final_step: float
    pg_norm: float
    converged: bool


@dataclass
class PathRecord:
    """One solved point on a path"""

    kind: str
    scale: float  # ρ, c or t
    theta: Optional[ParamPoint]
    log_loss: float
    profile: Optional[MarginProfile]
    restarts_used: int = 0
    iterations: int = 0
    final_step: float = 0.0
    projected_grad_norm: float = float("nan")
    converged: bool = True
    status: str = "ok"
    theta_norm: float = 1.0  # ‖θ_r(c)‖ for regularization, ‖θ(t)‖ for optimization
    alternates: Tuple[np.ndarray, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def min_margin(self) -> float:
        return self.profile.min_margin if self.profile is not None else float("nan")

    @property
    def direction(self) -> Optional[np.ndarray]:
        if self.theta is None:
            return None
        norm = np.linalg.norm(self.theta.theta)
        return self.theta.theta / norm if norm > 0 else self.theta.theta

    @property
    def solver_meta(self) -> Dict:
        return {
            "restarts_used": self.restarts_used,
            "iterations": self.iterations,
            "final_step": self.final_step,
            "projected_grad_norm": self.projected_grad_norm,
        }

    @classmethod
    def failed(cls, kind: str, scale: float, reason: str) -> "PathRecord":
        return cls(
            kind=kind,
            scale=float(scale),
            theta=None,
            log_loss=float("nan"),
            profile=None,
            converged=False,
            status=f"failed: {reason}",
        )


def _strictly_monotone(seq: List[float], decreasing: bool) -> bool:
    pairs = zip(seq, seq[1:])
    if decreasing:
        return all(b < a for a, b in pairs)
    return all(b > a for a, b in pairs)


@dataclass
class SweepResult:
    """Records over a strictly increasing scale grid"""

    kind: str
    records: List[PathRecord]
    dataset_ref: str
    spec_ref: List[Dict]
    norm_tag: str
    rng_seed: int
    diverged: bool = False
    loss_strictly_decreasing: bool = field(init=False)
    margin_strictly_increasing: bool = field(init=False)

    def __post_init__(self):
        self.refresh_flags()

    def refresh_flags(self):
        ok = self.ok_records()
        self.loss_strictly_decreasing = _strictly_monotone([r.log_loss for r in ok], True)
        self.margin_strictly_increasing = _strictly_monotone([r.min_margin for r in ok], False)

    @property
    def scales(self) -> List[float]:
        return [r.scale for r in self.records]

    @property
    def assumption_flags(self) -> Dict[str, bool]:
        return {
            "loss_strictly_decreasing": self.loss_strictly_decreasing,
            "margin_strictly_increasing": self.margin_strictly_increasing,
        }

    def ok_records(self) -> List[PathRecord]:
        return [r for r in self.records if r.ok]

    def to_rows(self, n_samples: int, total_dim: int) -> Tuple[List[str], List[List]]:
        """Fixed-width table: one row per record"""
        header = (
            ["kind", "scale", "status", "log_loss", "min_margin"]
            + [f"margin_{i + 1}" for i in range(n_samples)]
            + [f"theta_{j + 1}" for j in range(total_dim)]
            + ["theta_norm", "pg_norm", "restarts_used"]
        )
        rows = []
        for r in self.records:
            if r.ok:
                margins = list(r.profile.sorted_margins)
                theta = list(r.theta.theta)
            else:
                margins = [float("nan")] * n_samples
                theta = [float("nan")] * total_dim
            rows.append(
                [r.kind, r.scale, r.status, r.log_loss, r.min_margin]
                + margins
                + theta
                + [r.theta_norm, r.projected_grad_norm, r.restarts_used]
            )
        return header, rows
