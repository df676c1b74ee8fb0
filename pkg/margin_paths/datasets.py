"""
Deterministic datasets for the experiments

Fixed fixtures reproduce small hand-checkable instances; the random kinds are
seeded through numpy's Generator and verified after generation.
"""
import logging
from typing import Callable, Dict, Optional

import numpy as np

from margin_paths.errors import PlantFailed
from margin_paths.predictor import Dataset, Linear, PredictorSpec
from margin_paths.solvers.oracle import grid_oracle

logger = logging.getLogger("marginpaths.datasets")

PLANTED_MARGIN = 0.1
MAX_RETRIES = 100

# name -> (samples, data dim)
FIXTURES: Dict[str, tuple] = {
    "symmetric_pair": ([((1.0, 0.0), 1), ((0.0, 1.0), 1)], 2),
    "lexicographic_demo": ([((1.0, 0.0), 1), ((1.0, 1.0), 1)], 2),
    "deep_separable_ensemble": (
        [((1.0, 0.2), 1), ((-0.3, -1.0), -1), ((0.8, 0.9), 1)],
        2,
    ),
    "shallow_necessary_ensemble": ([((-1.0,), 1), ((-2.0,), 1)], 1),
    "svm_bias_helps": ([((0.0, 0.5), 1), ((2.0, 0.5), -1)], 2),
    "svm_bias_neutral": ([((2.0,), 1), ((-1.0,), -1)], 1),
    "powerlog_demo": ([((1.0, 0.0), 1), ((0.0, 2.0), 1)], 2),
}


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    raw = rng.standard_normal((n, d))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    return raw / np.where(norms > 0, norms, 1.0)


def _separable_gaussian(d: int, n: int, seed: int) -> Dataset:
    """Unit directions labelled by a planted separator with |uᵀx| ≥ 0.1"""
    rng = np.random.default_rng(seed)
    for attempt in range(MAX_RETRIES):
        separator = _unit_rows(rng, 1, d)[0]
        X = _unit_rows(rng, n, d)
        for i in range(n):
            tries = 0
            while abs(X[i] @ separator) < PLANTED_MARGIN and tries < MAX_RETRIES:
                X[i] = _unit_rows(rng, 1, d)[0]
                tries += 1
        planted = X @ separator
        if np.min(np.abs(planted)) < PLANTED_MARGIN:
            continue
        y = np.where(planted > 0, 1.0, -1.0)
        ds = Dataset(X=X, y=y, seed=seed, name=f"separable_gaussian(d={d},N={n},seed={seed})")
        if _verify_separable(ds, separator):
            if attempt:
                logger.debug("separable_gaussian accepted after %d retries", attempt)
            return ds
    raise PlantFailed(f"could not plant margin {PLANTED_MARGIN} in {MAX_RETRIES} attempts")


def _verify_separable(ds: Dataset, separator: np.ndarray) -> bool:
    if ds.dim <= 3:
        spec = PredictorSpec.of([Linear()], ds.dim)
        return grid_oracle(spec, ds, "L2", resolution=1e-2).best_margin > 0
    return float(np.min(ds.Z @ separator)) >= PLANTED_MARGIN


def _all_positive(d: int, n: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    X = _unit_rows(rng, n, d)
    return Dataset(X=X, y=np.ones(n), seed=seed, name=f"all_positive(d={d},N={n},seed={seed})")


GENERATORS: Dict[str, Callable[[int, int, int], Dataset]] = {
    "separable_gaussian": _separable_gaussian,
    "all_positive": _all_positive,
}

KINDS = tuple(sorted(list(FIXTURES) + list(GENERATORS)))


def generate_dataset(
    kind: str, d: Optional[int] = None, N: Optional[int] = None, seed: int = 0
) -> Dataset:
    """
    Build a dataset by name

    Args:
        kind: Fixture name or random generator name
        d: Data dimension; fixtures accept None or their own dimension
        N: Sample count for the random kinds (ignored by fixtures)
        seed: Generator seed

    Returns:
        Dataset whose bytes depend only on (kind, d, N, seed)
    """
    if kind in FIXTURES:
        samples, dim = FIXTURES[kind]
        if d is not None and d != dim:
            raise ValueError(f"fixture {kind!r} is {dim}-dimensional, got d={d}")
        return Dataset.from_samples(samples, seed="fixed", name=kind)
    if kind in GENERATORS:
        d = 2 if d is None else int(d)
        N = 3 if N is None else int(N)
        if d < 1 or N < 1:
            raise ValueError("d and N must be at least 1")
        return GENERATORS[kind](d, N, int(seed))
    raise ValueError(f"unknown dataset kind {kind!r}; known: {list(KINDS)}")
