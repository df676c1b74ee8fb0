"""
Exponential loss, margins and margin profiles

The loss is carried in log space: log ℒ(ρθ) = logsumexp(−f(ρθ)), which shifts by
the smallest margin before exponentiating.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from margin_paths.predictor import Dataset, PredictorSpec, as_theta, jacobian, values


@dataclass
class MarginProfile:
    """Sorted margins with the rank → sample permutation"""

    sorted_margins: np.ndarray
    perm: np.ndarray
    scale: float

    @property
    def min_margin(self) -> float:
        return float(self.sorted_margins[0])

    def raw(self) -> np.ndarray:
        out = np.empty_like(self.sorted_margins)
        out[self.perm] = self.sorted_margins
        return out


@dataclass
class SupportSet:
    indices: Tuple[int, ...]
    gamma_star: float
    tol: float

    def __len__(self):
        return len(self.indices)


def scaled_margins(spec: PredictorSpec, theta, rho: float, ds: Dataset) -> np.ndarray:
    """f_n(ρθ) for every sample"""
    return values(spec, float(rho) * as_theta(theta), ds)


def exp_loss(spec: PredictorSpec, theta, rho: float, ds: Dataset) -> Tuple[float, float]:
    """
    ℒ(ρθ) = Σ exp(−f_n(ρθ))

    Returns:
        (log_value, value); value underflows to 0 long before log_value loses precision
    """
    log_value = float(logsumexp(-scaled_margins(spec, theta, rho, ds)))
    return log_value, float(np.exp(log_value))


def margin(spec: PredictorSpec, theta, rho: float, ds: Dataset) -> float:
    return float(np.min(scaled_margins(spec, theta, rho, ds)))


def margin_profile(spec: PredictorSpec, theta, rho: float, ds: Dataset) -> MarginProfile:
    f = scaled_margins(spec, theta, rho, ds)
    perm = np.argsort(f, kind="stable")
    return MarginProfile(sorted_margins=f[perm], perm=perm, scale=float(rho))


def support_set(
    spec: PredictorSpec,
    theta,
    ds: Dataset,
    tol: Optional[float] = None,
    gamma_star: Optional[float] = None,
) -> SupportSet:
    """
    Samples whose margin at ρ = 1 is within tol of the level

    The level defaults to θ's own minimum margin; pass gamma_star to test
    against an externally solved optimum.
    """
    f = scaled_margins(spec, theta, 1.0, ds)
    level = float(np.min(f)) if gamma_star is None else float(gamma_star)
    if tol is None:
        tol = 1e-6 * max(1.0, abs(level))
    indices = tuple(int(i) for i in np.flatnonzero(np.abs(f - level) <= tol))
    return SupportSet(indices=indices, gamma_star=level, tol=float(tol))


def softmin_margin(spec: PredictorSpec, theta, rho: float, ds: Dataset) -> float:
    """−log ℒ(ρθ); lies in [margin − log N, margin]"""
    return -exp_loss(spec, theta, rho, ds)[0]


def log_loss_and_grad(
    spec: PredictorSpec, theta, rho: float, ds: Dataset, beta: float = 1.0
) -> Tuple[float, np.ndarray]:
    """
    Smoothed objective (1/β) log Σ exp(−β f_n(ρθ)) and its gradient in θ

    β = 1 is the log-loss; larger β approaches −min_n f_n(ρθ).
    """
    x = float(rho) * as_theta(theta)
    f = values(spec, x, ds)
    value = float(logsumexp(-beta * f)) / beta
    weights = softmax(-beta * f)
    g = -float(rho) * (jacobian(spec, x, ds).T @ weights)
    return value, g
