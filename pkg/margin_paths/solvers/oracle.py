"""
Brute-force grid oracle over low-dimensional unit spheres
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from margin_paths.errors import DimensionTooLarge
from margin_paths.predictor import Dataset, PredictorSpec, jacobian, values

logger = logging.getLogger("marginpaths.oracle")

MAX_ORACLE_DIM = 3
CHUNK = 200_000


@dataclass
class OracleResult:
    """Full margin landscape on a sphere discretization"""

    points: np.ndarray  # (P, d) grid points on the unit sphere
    margins: np.ndarray  # (P, N) f_n at every point, ρ = 1
    min_margins: np.ndarray  # (P,)
    best_index: int
    spacing: float  # max distance from a sphere point to its nearest grid point, bound
    slack: float
    norm_tag: str

    @property
    def best_point(self) -> np.ndarray:
        return self.points[self.best_index]

    @property
    def best_margin(self) -> float:
        return float(self.min_margins[self.best_index])

    @property
    def argmax_mask(self) -> np.ndarray:
        return self.min_margins >= self.best_margin - self.slack

    @property
    def argmax_points(self) -> np.ndarray:
        return self.points[self.argmax_mask]


def _circle(resolution: float):
    count = int(np.ceil(2.0 * np.pi / resolution))
    angles = 2.0 * np.pi * np.arange(count) / count
    return np.stack([np.cos(angles), np.sin(angles)], axis=1), 2.0 * np.pi / count


def _fibonacci_sphere(resolution: float):
    count = int(np.ceil(4.0 * np.pi / resolution**2))
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    r = np.sqrt(1.0 - z**2)
    phi = np.pi * (1.0 + np.sqrt(5.0)) * k
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1), 2.0 * resolution


def _box_faces(d: int, resolution: float):
    m = int(np.ceil(2.0 / resolution)) + 1
    axis = np.linspace(-1.0, 1.0, m)
    faces = []
    for i in range(d):
        others = np.array(list(itertools.product(axis, repeat=d - 1))) if d > 1 else np.zeros((1, 0))
        for sign in (-1.0, 1.0):
            face = np.insert(others, i, sign, axis=1)
            faces.append(face)
    step = 2.0 / (m - 1)
    return np.unique(np.concatenate(faces), axis=0), step * np.sqrt(max(d - 1, 1))


def _cross_polytope_faces(d: int, resolution: float):
    m = int(np.ceil(1.0 / resolution))
    simplex = np.array(
        [c for c in itertools.product(range(m + 1), repeat=d) if sum(c) == m], dtype=float
    ) / m
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
    pts = np.concatenate([simplex * s for s in signs])
    return np.unique(pts, axis=0), 2.0 / m


def sphere_grid(d: int, norm_tag: str, resolution: float):
    """Deterministic discretization of the unit sphere of norm_tag in R^d"""
    if d > MAX_ORACLE_DIM:
        raise DimensionTooLarge(f"grid oracle supports total_dim <= {MAX_ORACLE_DIM}, got {d}")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if d == 1:
        return np.array([[-1.0], [1.0]]), 0.0
    if norm_tag == "L2":
        return _circle(resolution) if d == 2 else _fibonacci_sphere(resolution)
    if norm_tag == "Linf":
        return _box_faces(d, resolution)
    if norm_tag == "L1":
        return _cross_polytope_faces(d, resolution)
    raise ValueError(f"unknown norm tag {norm_tag!r}")


def grid_oracle(
    spec: PredictorSpec,
    ds: Dataset,
    norm_tag: str = "L2",
    resolution: float = 1e-3,
    slack: Optional[float] = None,
) -> OracleResult:
    """
    Evaluate every grid point of the unit sphere and keep the near-best set

    Args:
        resolution: Angular step for L2, face step for L1/L∞
        slack: Tolerance below the best min-margin; defaults to twice the
            largest sample-gradient norm at the best point times the grid spacing

    Returns:
        OracleResult with the margin landscape at ρ = 1
    """
    points, spacing = sphere_grid(spec.total_dim, norm_tag, resolution)
    chunks = []
    for start in range(0, points.shape[0], CHUNK):
        block = points[start : start + CHUNK]
        if spec.is_log:
            inner = block @ ds.Z.T
            feasible = np.all(inner > 0, axis=1)
            margins = np.full((block.shape[0], ds.n_samples), -np.inf)
            if np.any(feasible):
                margins[feasible] = values(spec, block[feasible], ds)
        else:
            margins = values(spec, block, ds)
        chunks.append(margins)
    margins = np.concatenate(chunks)
    min_margins = np.min(margins, axis=1)
    best = int(np.argmax(min_margins))
    if slack is None:
        lipschitz = float(np.max(np.linalg.norm(jacobian(spec, points[best], ds), axis=1)))
        slack = 2.0 * lipschitz * spacing
    logger.debug(
        "Oracle: %d points, best margin %.6g, slack %.3g", points.shape[0], min_margins[best], slack
    )
    return OracleResult(
        points=points,
        margins=margins,
        min_margins=min_margins,
        best_index=best,
        spacing=float(spacing),
        slack=float(slack),
        norm_tag=norm_tag,
    )
