"""
Swapped-problem cross-check for the constrained path

For φ(ρ) = min ℒ(w) s.t. ‖w‖ ≤ ρ strictly decreasing, the swapped problem
min ‖w‖ s.t. ℒ(w) ≤ φ(ρ) has the same solutions and attains ‖w‖ = ρ.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from margin_paths.predictor import Dataset, PredictorSpec, jacobian, values

logger = logging.getLogger("marginpaths.pareto")


@dataclass
class ParetoPoint:
    rho: float
    log_phi: float
    decreasing: bool
    swapped_norm: Optional[float] = None
    passed: Optional[bool] = None


@dataclass
class ParetoReport:
    tol: float
    points: List[ParetoPoint] = field(default_factory=list)

    @property
    def monotonicity_violated(self) -> bool:
        return not all(p.decreasing for p in self.points)

    @property
    def passed(self) -> bool:
        return all(p.passed is not False for p in self.points)


def _decreasing_flags(log_phi: List[float]) -> List[bool]:
    flags = []
    for i, value in enumerate(log_phi):
        ok = True
        if i > 0:
            ok = ok and value < log_phi[i - 1]
        if i + 1 < len(log_phi):
            ok = ok and log_phi[i + 1] < value
        flags.append(ok)
    return flags


def _swapped_norm(
    spec: PredictorSpec, ds: Dataset, rho: float, log_phi: float, start: np.ndarray
) -> Optional[float]:
    """min ‖w‖ s.t. log ℒ(w) ≤ log φ, solved by SLSQP from a feasible start"""
    scale = max(1.0, rho) ** 2

    def objective(w):
        return float(np.dot(w, w)) / scale, 2.0 * w / scale

    def slack(w):
        return np.array([log_phi - float(logsumexp(-values(spec, w, ds)))])

    def slack_jac(w):
        f = values(spec, w, ds)
        return (jacobian(spec, w, ds).T @ softmax(-f))[None, :]

    res = minimize(
        objective,
        start,
        jac=True,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": slack, "jac": slack_jac}],
        options={"maxiter": 500, "ftol": 1e-16},
    )
    if slack(res.x)[0] < -1e-9:
        logger.warning("Swapped problem at rho=%g ended infeasible: %s", rho, res.message)
        return None
    return float(np.linalg.norm(res.x))


def pareto_cross_check(
    phi_samples: Sequence[Tuple[float, float]],
    tol: float = 1e-4,
    spec: Optional[PredictorSpec] = None,
    ds: Optional[Dataset] = None,
    directions: Optional[Sequence[np.ndarray]] = None,
) -> ParetoReport:
    """
    Check strict decrease of φ and re-solve the swapped problem per grid point

    Args:
        phi_samples: (ρ, log φ(ρ)) pairs from a constrained sweep, ρ increasing
        tol: Absolute tolerance on |swapped norm − ρ|
        spec, ds: Problem to re-solve; without them only monotonicity is checked
        directions: Constrained-path directions used to seed the swapped solve

    Returns:
        ParetoReport; a monotonicity violation is reported, never raised
    """
    rhos = [float(r) for r, _ in phi_samples]
    log_phi = [float(v) for _, v in phi_samples]
    report = ParetoReport(tol=tol)
    for i, (rho, lp, dec) in enumerate(zip(rhos, log_phi, _decreasing_flags(log_phi))):
        point = ParetoPoint(rho=rho, log_phi=lp, decreasing=dec)
        if dec and spec is not None and ds is not None:
            if directions is not None:
                direction = np.asarray(directions[i], dtype=float)
            else:
                direction = np.ones(spec.total_dim)
            direction = direction / np.linalg.norm(direction)
            candidates = []
            for factor in (1.0 + 1e-3, 1.5):
                norm = _swapped_norm(spec, ds, rho, lp, factor * rho * direction)
                if norm is not None:
                    candidates.append(norm)
            if candidates:
                point.swapped_norm = min(candidates)
                point.passed = abs(point.swapped_norm - rho) <= tol
            else:
                point.passed = False
        report.points.append(point)
    if report.monotonicity_violated:
        logger.warning("φ(ρ) is not strictly decreasing on the grid")
    return report
