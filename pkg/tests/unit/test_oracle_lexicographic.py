"""
Unit tests for the grid oracle and the lexicographic chain
"""
import numpy as np
import pytest

from margin_paths.errors import DimensionTooLarge, UnsupportedFamily
from margin_paths.loss_margin import margin
from margin_paths.predictor import Dataset, Linear, LogWrap, PredictorSpec, build_spec
from margin_paths.solvers import (
    SolverOptions,
    grid_oracle,
    lexicographic_solve,
    solve_margin,
    sphere_grid,
)


def lexicographic_demo():
    return Dataset.from_samples([((1.0, 0.0), 1), ((1.0, 1.0), 1)], name="lexicographic_demo")


class TestSphereGrid:
    """Test sphere discretizations"""

    def test_circle_points_are_unit(self):
        points, spacing = sphere_grid(2, "L2", 1e-2)
        assert np.allclose(np.linalg.norm(points, axis=1), 1.0)
        assert spacing <= 1e-2

    def test_fibonacci_sphere(self):
        points, _ = sphere_grid(3, "L2", 5e-2)
        assert points.shape[1] == 3
        assert np.allclose(np.linalg.norm(points, axis=1), 1.0)

    def test_box_faces(self):
        points, _ = sphere_grid(2, "Linf", 0.1)
        assert np.allclose(np.max(np.abs(points), axis=1), 1.0)
        assert np.any(np.all(np.isclose(points, [1.0, 1.0]), axis=1))

    def test_cross_polytope(self):
        points, _ = sphere_grid(3, "L1", 0.25)
        assert np.allclose(np.sum(np.abs(points), axis=1), 1.0)

    def test_dimension_limit(self):
        with pytest.raises(DimensionTooLarge):
            sphere_grid(4, "L2", 0.1)


class TestGridOracle:
    """Test brute-force margin maximization"""

    def test_symmetric_pair(self):
        ds = Dataset.from_samples([((1.0, 0.0), 1), ((0.0, 1.0), 1)])
        spec = PredictorSpec.of([Linear()], 2)
        oracle = grid_oracle(spec, ds, "L2", 1e-3)
        assert oracle.best_margin == pytest.approx(1.0 / np.sqrt(2.0), abs=oracle.slack)
        diagonal = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert np.linalg.norm(oracle.best_point - diagonal) <= oracle.spacing
        assert np.all(oracle.min_margins[oracle.argmax_mask] >= oracle.best_margin - oracle.slack)

    def test_log_family_outside_cone(self):
        """Test points outside the feasible cone never win"""
        ds = Dataset.from_samples([((1.0, 0.0), 1), ((0.0, 2.0), 1)])
        spec = PredictorSpec.of([LogWrap()], 2)
        oracle = grid_oracle(spec, ds, "L2", 1e-2)
        assert np.all(oracle.best_point > 0)

    def test_total_dim_too_large(self):
        ds = Dataset.from_samples([((1.0, 0.0), 1)])
        spec = build_spec([{"family": "linear"}, {"family": "product_linear", "depth": 2}], 2)
        with pytest.raises(DimensionTooLarge):
            grid_oracle(spec, ds, "L2", 1e-2)


class TestLexicographic:
    """Test the lexicographic chain under the L∞ norm"""

    def setup_method(self):
        self.ds = lexicographic_demo()
        self.spec = PredictorSpec.of([Linear()], 2)
        self.opts = SolverOptions(norm_tag="Linf", restarts=4, seed=0)

    def test_certified_chain(self):
        chain = lexicographic_solve(self.spec, self.ds, self.opts, grid_res=1e-3)
        assert [lvl.level for lvl in chain] == [1, 2]
        assert all(lvl.certified for lvl in chain)
        first, second = chain
        assert first.margin_value == pytest.approx(1.0, abs=1e-3)
        for t in np.linspace(0.0, 1.0, 6):
            assert first.distance_to(np.array([1.0, t])) <= 2e-3
        assert np.max(np.linalg.norm(second.survivors - [1.0, 1.0], axis=1)) <= 1e-2
        assert second.survivors.shape[0] < first.survivors.shape[0]

    def test_levels_are_nested(self):
        chain = lexicographic_solve(self.spec, self.ds, self.opts, grid_res=1e-2)
        outer = {tuple(p) for p in chain[0].survivors}
        assert {tuple(p) for p in chain[1].survivors} <= outer

    def test_heuristic_chain(self):
        chain = lexicographic_solve(self.spec, self.ds, self.opts, mode="heuristic")
        assert not any(lvl.certified for lvl in chain)
        assert np.allclose(chain[-1].representative, [1.0, 1.0], atol=2e-2)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            lexicographic_solve(self.spec, self.ds, self.opts, mode="exact")

    def test_needs_homogeneous_spec(self):
        spec = PredictorSpec.of([LogWrap()], 2)
        with pytest.raises(UnsupportedFamily):
            lexicographic_solve(spec, self.ds, self.opts)


class TestOracleDominance:
    """Test no unit direction beats the grid oracle by more than its slack"""

    def setup_method(self):
        rng = np.random.default_rng(41)
        X = np.abs(rng.standard_normal((5, 2))) + 0.1
        self.ds = Dataset(X=X, y=np.ones(5))
        self.spec = PredictorSpec.of([Linear()], 2)
        self.oracle = grid_oracle(self.spec, self.ds, "L2", 1e-3)
        self.rng = rng

    def test_random_directions(self):
        for _ in range(200):
            theta = self.rng.standard_normal(2)
            theta /= np.linalg.norm(theta)
            gamma = margin(self.spec, theta, 1.0, self.ds)
            assert gamma <= self.oracle.best_margin + self.oracle.slack

    def test_solver_does_not_beat_oracle(self):
        record = solve_margin(self.spec, self.ds, 1.0, SolverOptions(restarts=4, seed=0))
        assert record.ok
        assert record.min_margin <= self.oracle.best_margin + self.oracle.slack
        assert record.min_margin >= self.oracle.best_margin - self.oracle.slack
