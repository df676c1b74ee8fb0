"""
First-order optimality checks

KKT for the max-margin problem (multipliers by nonnegative least squares),
LICQ on the support gradients, and alignment of −∇ℒ with θ along the
constrained and optimization paths.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import svdvals
from scipy.optimize import nnls
from scipy.special import logsumexp, softmax

from margin_paths.errors import EmptySupport, NonSmoothSpec
from margin_paths.loss_margin import SupportSet, support_set
from margin_paths.predictor import Dataset, PredictorSpec, as_theta, jacobian, values
from margin_paths.solvers.records import SweepResult

logger = logging.getLogger("marginpaths.stationarity")

SCALE_CONVENTION = "unit-norm theta; multipliers absorb the joint scale"
SURROGATE_NOTE = "surrogate for t -> infinity: last 3 checkpoints nonincreasing and below tol"


@dataclass
class KktReport:
    """Outcome of a first-order check of the max-margin problem"""

    support: SupportSet
    lambdas: np.ndarray  # aligned with support.indices
    primal_residual: float
    stationarity_residual: float
    licq_sigma_min: float
    passed: bool
    tol_p: float
    tol_s: float
    gamma_source: str = "solve_margin"
    scale_convention: str = SCALE_CONVENTION

    def full_lambdas(self, n_samples: int) -> np.ndarray:
        out = np.zeros(n_samples)
        out[list(self.support.indices)] = self.lambdas
        return out

    def to_dict(self) -> Dict:
        return {
            "support": list(self.support.indices),
            "gamma_star": self.support.gamma_star,
            "support_tol": self.support.tol,
            "lambdas": [float(v) for v in self.lambdas],
            "primal_residual": self.primal_residual,
            "stationarity_residual": self.stationarity_residual,
            "licq_sigma_min": self.licq_sigma_min,
            "tol_p": self.tol_p,
            "tol_s": self.tol_s,
            "pass": self.passed,
            "gamma_source": self.gamma_source,
            "scale_convention": self.scale_convention,
        }


def _smallest_singular_value(rows: np.ndarray) -> float:
    if rows.shape[0] == 0:
        return float("nan")
    if rows.shape[0] > rows.shape[1]:
        return 0.0
    return float(np.min(svdvals(rows)))


def kkt_margin_check(
    spec: PredictorSpec,
    theta_bar,
    ds: Dataset,
    gamma_star: float,
    tol_p: float = 1e-6,
    tol_s: float = 1e-5,
    support_tol: Optional[float] = None,
    gamma_source: str = "solve_margin",
) -> KktReport:
    """
    Check θ̄ = Σ_{n∈S} λ_n ∇f_n(θ̄) with λ ≥ 0 and f_n(θ̄) ≥ γ*

    Args:
        theta_bar: Unit-norm candidate direction
        gamma_star: Optimal margin at ρ = 1
        support_tol: Support tolerance; defaults to 1e-6·max(1, |γ*|)
        gamma_source: Provenance of γ* carried into the report

    Returns:
        KktReport; λ comes from scipy's active-set NNLS
    """
    if not spec.smooth:
        raise NonSmoothSpec("KKT check is defined for smooth specs only")
    theta = as_theta(theta_bar)
    f = values(spec, theta, ds)
    primal = float(max(0.0, np.max(gamma_star - f)))
    support = support_set(spec, theta, ds, tol=support_tol, gamma_star=gamma_star)
    if not support.indices:
        if primal > tol_p:
            logger.debug("Empty support with primal violation %.3e", primal)
            return KktReport(
                support=support,
                lambdas=np.zeros(0),
                primal_residual=primal,
                stationarity_residual=float(np.linalg.norm(theta)),
                licq_sigma_min=float("nan"),
                passed=False,
                tol_p=tol_p,
                tol_s=tol_s,
                gamma_source=gamma_source,
            )
        raise EmptySupport(f"no margin within {support.tol:.3g} of gamma*={gamma_star:.6g}")
    rows = jacobian(spec, theta, ds)[list(support.indices)]
    lambdas, residual = nnls(rows.T, theta)
    report = KktReport(
        support=support,
        lambdas=lambdas,
        primal_residual=primal,
        stationarity_residual=float(residual),
        licq_sigma_min=_smallest_singular_value(rows),
        passed=primal <= tol_p and residual <= tol_s,
        tol_p=tol_p,
        tol_s=tol_s,
        gamma_source=gamma_source,
    )
    return report


@dataclass
class LicqResult:
    sigma_min: float
    passed: bool
    support: SupportSet


def licq_check(
    spec: PredictorSpec,
    theta_bar,
    ds: Dataset,
    tol: float = 1e-8,
    support_tol: Optional[float] = None,
    gamma_star: Optional[float] = None,
) -> LicqResult:
    """Smallest singular value of the support-gradient matrix; pass iff it exceeds tol"""
    if not spec.smooth:
        raise NonSmoothSpec("LICQ check is defined for smooth specs only")
    theta = as_theta(theta_bar)
    support = support_set(spec, theta, ds, tol=support_tol, gamma_star=gamma_star)
    if not support.indices:
        raise EmptySupport("LICQ check needs a non-empty support")
    rows = jacobian(spec, theta, ds)[list(support.indices)]
    sigma = _smallest_singular_value(rows)
    return LicqResult(sigma_min=sigma, passed=sigma > tol, support=support)


@dataclass
class ConstrainedStationarity:
    alignment_residual: float
    norm_residual: float
    passed: bool
    zero_gradient: bool = False
    log_grad_norm: float = float("nan")


def descent_direction(spec: PredictorSpec, theta, rho: float, ds: Dataset) -> Tuple[np.ndarray, float]:
    """
    Unit vector along −∇_θ ℒ(ρθ) and log‖∇_θ ℒ(ρθ)‖

    The loss weights are normalized with a softmax so the direction survives
    when ℒ itself underflows.
    """
    x = float(rho) * as_theta(theta)
    f = values(spec, x, ds)
    raw = jacobian(spec, x, ds).T @ softmax(-f)
    size = float(np.linalg.norm(raw))
    if size < 1e-300:
        return np.zeros_like(raw), float("-inf")
    log_norm = float(np.log(rho) + logsumexp(-f) + np.log(size))
    return raw / size, log_norm


def constrained_stationarity(
    spec: PredictorSpec,
    theta,
    rho: float,
    ds: Dataset,
    align_tol: float = 1e-6,
    norm_tol: float = 1e-9,
) -> ConstrainedStationarity:
    """‖−∇ℒ(ρθ)/‖∇ℒ(ρθ)‖ − θ/‖θ‖‖ and |‖θ‖ − 1|"""
    theta = as_theta(theta)
    norm = float(np.linalg.norm(theta))
    direction, log_norm = descent_direction(spec, theta, rho, ds)
    if not np.isfinite(log_norm):
        logger.warning("Zero gradient at rho=%g; alignment undefined", rho)
        return ConstrainedStationarity(
            alignment_residual=float("nan"),
            norm_residual=abs(norm - 1.0),
            passed=False,
            zero_gradient=True,
        )
    alignment = float(np.linalg.norm(direction - theta / norm))
    norm_residual = abs(norm - 1.0)
    return ConstrainedStationarity(
        alignment_residual=alignment,
        norm_residual=norm_residual,
        passed=alignment <= align_tol and norm_residual <= norm_tol,
        log_grad_norm=log_norm,
    )


@dataclass
class AlignmentSeries:
    points: List[Tuple[int, float, float]] = field(default_factory=list)  # (t, cosine, residual)
    verdict: Optional[bool] = None
    tol: float = 1e-3
    note: str = SURROGATE_NOTE

    @property
    def final_cosine(self) -> float:
        return self.points[-1][1] if self.points else float("nan")

    @property
    def final_residual(self) -> float:
        return self.points[-1][2] if self.points else float("nan")


def alignment_series(
    opt_run: SweepResult, spec: PredictorSpec, ds: Dataset, tol: float = 1e-3
) -> AlignmentSeries:
    """
    Per-checkpoint cosine between θ(t) and −∇ℒ(θ(t)) plus the constrained
    stationarity residual at ρ = ‖θ(t)‖

    The verdict "directionally stationary" needs at least 3 checkpoints.
    """
    if opt_run.kind != "optimization":
        raise ValueError("alignment series needs an optimization run")
    series = AlignmentSeries(tol=tol)
    for record in opt_run.ok_records():
        theta = record.theta.theta
        norm = float(np.linalg.norm(theta))
        if norm == 0:
            continue
        unit = theta / norm
        direction, _ = descent_direction(spec, unit, norm, ds)
        cosine = float(np.dot(direction, unit))
        residual = float(np.linalg.norm(direction - unit))
        series.points.append((int(record.scale), cosine, residual))
    if len(series.points) >= 3:
        last = [p[2] for p in series.points[-3:]]
        series.verdict = bool(last[0] >= last[1] >= last[2] and last[2] < tol)
    return series
