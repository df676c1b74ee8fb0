"""
Unit tests for dataset fixtures and generators
"""
import numpy as np
import pytest

from margin_paths.datasets import FIXTURES, KINDS, generate_dataset
from margin_paths.predictor import Linear, PredictorSpec
from margin_paths.solvers import grid_oracle


class TestFixtures:
    """Test the fixed hand-checkable instances"""

    def test_symmetric_pair(self):
        ds = generate_dataset("symmetric_pair", d=2)
        assert [(x.tolist(), y) for x, y in ds.samples] == [([1.0, 0.0], 1), ([0.0, 1.0], 1)]

    def test_lexicographic_demo(self):
        ds = generate_dataset("lexicographic_demo")
        assert [(x.tolist(), y) for x, y in ds.samples] == [([1.0, 0.0], 1), ([1.0, 1.0], 1)]

    def test_fixture_dimension_mismatch(self):
        with pytest.raises(ValueError):
            generate_dataset("symmetric_pair", d=3)

    def test_every_fixture_builds(self):
        for name in FIXTURES:
            ds = generate_dataset(name)
            assert ds.name == name
            assert ds.n_samples >= 2

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            generate_dataset("moons")

    def test_kinds_listing(self):
        assert "separable_gaussian" in KINDS
        assert "deep_separable_ensemble" in KINDS


class TestGenerators:
    """Test the seeded random kinds"""

    def test_same_seed_same_bytes(self):
        first = generate_dataset("separable_gaussian", d=3, N=5, seed=11)
        second = generate_dataset("separable_gaussian", d=3, N=5, seed=11)
        assert first.X.tobytes() == second.X.tobytes()
        assert first.y.tobytes() == second.y.tobytes()

    def test_different_seeds_differ(self):
        first = generate_dataset("separable_gaussian", seed=1)
        second = generate_dataset("separable_gaussian", seed=2)
        assert not np.array_equal(first.X, second.X)

    def test_separable_gaussian_is_separable(self):
        ds = generate_dataset("separable_gaussian", d=2, N=5, seed=4)
        oracle = grid_oracle(PredictorSpec.of([Linear()], 2), ds, "L2", 1e-3)
        assert oracle.best_margin > 0
        assert np.allclose(np.linalg.norm(ds.X, axis=1), 1.0)

    def test_high_dimension_uses_planted_margin(self):
        ds = generate_dataset("separable_gaussian", d=6, N=4, seed=0)
        assert ds.dim == 6
        assert ds.n_samples == 4

    def test_all_positive(self):
        ds = generate_dataset("all_positive", d=3, N=4, seed=5)
        assert np.all(ds.y == 1.0)
        assert ds.X.shape == (4, 3)

    def test_defaults(self):
        ds = generate_dataset("separable_gaussian")
        assert (ds.n_samples, ds.dim) == (3, 2)

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            generate_dataset("all_positive", d=0, N=3)
