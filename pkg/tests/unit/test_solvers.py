"""
Unit tests for the sphere solvers and path sweeps
"""
import numpy as np
import pytest

from margin_paths.config import geometric_grid
from margin_paths.datasets import generate_dataset
from margin_paths.errors import AllStartsInfeasible, DomainError
from margin_paths.predictor import Dataset, Linear, LogWrap, PredictorSpec, build_spec
from margin_paths.solvers import (
    SolverOptions,
    checkpoint_schedule,
    optimization_path,
    pareto_cross_check,
    project_l1_ball,
    project_simplex,
    regularization_path,
    retract,
    solve_constrained,
    solve_margin,
    sweep,
)
from margin_paths.solvers.sphere import draw_starts

DIAGONAL = np.array([1.0, 1.0]) / np.sqrt(2.0)


def symmetric_pair():
    return Dataset.from_samples([((1.0, 0.0), 1), ((0.0, 1.0), 1)], name="symmetric_pair")


class TestProjections:
    """Test ball projections and retractions"""

    def test_simplex(self):
        out = project_simplex(np.array([0.9, 0.6, -0.2]))
        assert out.sum() == pytest.approx(1.0)
        assert np.all(out >= 0)
        assert np.allclose(out, [0.65, 0.35, 0.0])

    def test_l1_ball_inside_is_identity(self):
        v = np.array([0.2, -0.3])
        assert np.allclose(project_l1_ball(v), v)

    def test_l1_ball_outside(self):
        out = project_l1_ball(np.array([2.0, -1.0]))
        assert np.sum(np.abs(out)) == pytest.approx(1.0)
        assert out[1] <= 0

    def test_retract_lands_on_sphere(self):
        rng = np.random.default_rng(1)
        v = rng.standard_normal(4) * 3.0
        assert np.linalg.norm(retract(v, "L2")) == pytest.approx(1.0)
        assert np.sum(np.abs(retract(v, "L1"))) == pytest.approx(1.0)
        assert np.max(np.abs(retract(v, "Linf"))) == pytest.approx(1.0)

    def test_retract_unknown_norm(self):
        with pytest.raises(ValueError):
            retract(np.ones(2), "L3")

    @pytest.mark.parametrize("norm_tag", ["L2", "L1", "Linf"])
    def test_retract_zero_vector(self, norm_tag):
        with pytest.raises(DomainError):
            retract(np.zeros(3), norm_tag)


class TestConstrainedAndMargin:
    """Test single-point constrained and margin solves"""

    def setup_method(self):
        self.ds = symmetric_pair()
        self.spec = PredictorSpec.of([Linear()], 2)
        self.opts = SolverOptions(restarts=4, seed=0)

    def test_constrained_symmetric_pair(self):
        record = solve_constrained(self.spec, self.ds, 4.0, self.opts)
        assert record.ok
        assert record.theta_norm == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(record.theta.theta, DIAGONAL, atol=1e-6)

    def test_margin_symmetric_pair(self):
        record = solve_margin(self.spec, self.ds, 1.0, self.opts)
        assert record.min_margin == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-6)

    def test_margin_never_below_constrained(self):
        """Test γ*(ρ) ≥ γ(ρ, θ_c(ρ))"""
        ds = Dataset.from_samples([((1.0, 0.2), 1), ((-0.3, -1.0), -1), ((0.8, 0.9), 1)])
        con = solve_constrained(self.spec, ds, 2.0, self.opts)
        best = solve_margin(self.spec, ds, 2.0, self.opts)
        assert best.min_margin >= con.min_margin - 1e-9
        assert best.min_margin - con.min_margin <= np.log(3.0) + 1e-3

    def test_l1_constrained_picks_vertex(self):
        ds = Dataset.from_samples([((1.0, 0.0), 1), ((1.0, 1.0), 1)])
        opts = SolverOptions(norm_tag="L1", restarts=4, seed=0)
        record = solve_constrained(self.spec, ds, 20.0, opts)
        assert np.allclose(record.theta.theta, [1.0, 0.0], atol=1e-3)

    def test_same_seed_same_answer(self):
        first = solve_constrained(self.spec, self.ds, 3.0, self.opts)
        second = solve_constrained(self.spec, self.ds, 3.0, self.opts)
        assert np.array_equal(first.theta.theta, second.theta.theta)

    def test_non_positive_rho(self):
        with pytest.raises(ValueError):
            solve_constrained(self.spec, self.ds, 0.0, self.opts)

    def test_log_family_direction_is_scale_free(self):
        """Test ℒ(ρθ) = ℒ(θ)/ρ leaves the constrained direction unchanged"""
        ds = Dataset.from_samples([((1.0, 0.0), 1), ((0.0, 2.0), 1)])
        spec = PredictorSpec.of([LogWrap()], 2)
        low = solve_constrained(spec, ds, 1.0, self.opts)
        high = solve_constrained(spec, ds, 100.0, self.opts)
        assert np.allclose(low.theta.theta, high.theta.theta, atol=1e-4)

    def test_log_family_starts_infeasible(self):
        """Test a dataset whose feasible cone is empty"""
        ds = Dataset.from_samples([((1.0, 0.0), 1), ((1.0, 0.0), -1)])
        spec = PredictorSpec.of([LogWrap()], 2)
        with pytest.raises(AllStartsInfeasible):
            draw_starts(spec, ds, SolverOptions(restarts=2, feasibility_resamples=5), 2)


class TestSweeps:
    """Test sweeps over ρ grids"""

    def setup_method(self):
        self.ds = symmetric_pair()
        self.spec = PredictorSpec.of([Linear()], 2)
        self.opts = SolverOptions(restarts=4, sweep_restarts=1, seed=0)

    def test_constrained_sweep_flags(self):
        result = sweep("constrained", self.spec, self.ds, [1.0, 4.0, 16.0], self.opts)
        assert len(result.records) == 3
        assert result.loss_strictly_decreasing
        assert result.margin_strictly_increasing
        header, rows = result.to_rows(self.ds.n_samples, self.spec.total_dim)
        assert len(rows) == 3
        assert len(header) == len(rows[0])

    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            sweep("constrained", self.spec, self.ds, [2.0, 1.0], self.opts)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            sweep("optimal", self.spec, self.ds, [1.0], self.opts)

    def test_regularization_norms_grow(self):
        result = regularization_path(self.spec, self.ds, [1.0, 10.0, 100.0], self.opts)
        norms = [r.theta_norm for r in result.records]
        assert all(b > a for a, b in zip(norms, norms[1:]))
        for record in result.records:
            assert np.allclose(record.theta.theta, DIAGONAL, atol=1e-5)

    def test_regularization_needs_l2(self):
        with pytest.raises(ValueError):
            regularization_path(self.spec, self.ds, [1.0], SolverOptions(norm_tag="L1"))


class TestOptimizationPath:
    """Test gradient descent on the unscaled loss"""

    def setup_method(self):
        self.ds = symmetric_pair()
        self.spec = PredictorSpec.of([Linear()], 2)

    def test_checkpoint_schedule(self):
        marks = checkpoint_schedule(1000, 20)
        assert marks[0] == 1
        assert marks[-1] == 1000
        assert marks == sorted(set(marks))

    def test_norm_grows_and_direction_converges(self):
        run = optimization_path(self.spec, self.ds, np.array([0.1, 0.12]), 0.5, 2000, checkpoints=30)
        assert not run.diverged
        norms = [r.theta_norm for r in run.records]
        assert all(b > a for a, b in zip(norms, norms[1:]))
        assert np.allclose(run.records[-1].direction, DIAGONAL, atol=1e-3)
        assert int(run.records[-1].scale) == 2000

    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            optimization_path(self.spec, self.ds, np.ones(2), 0.5, 0)

    def test_callable_schedule(self):
        run = optimization_path(
            self.spec, self.ds, np.ones(2), lambda t: 0.5 / np.sqrt(t), 100, checkpoints=5
        )
        assert run.records[-1].theta_norm > np.sqrt(2.0)


class TestPareto:
    """Test the φ(ρ) monotonicity and swapped-problem check"""

    def test_monotone_samples_without_problem(self):
        report = pareto_cross_check([(1.0, 0.5), (2.0, 0.1), (4.0, -0.7)])
        assert not report.monotonicity_violated
        assert report.passed
        assert all(p.passed is None for p in report.points)

    def test_violation_is_reported(self):
        report = pareto_cross_check([(1.0, 0.5), (2.0, 0.6), (4.0, -0.7)])
        assert report.monotonicity_violated

    def test_swapped_problem_recovers_rho(self):
        ds = symmetric_pair()
        spec = build_spec([{"family": "linear"}], 2)
        opts = SolverOptions(restarts=2, sweep_restarts=1, seed=0)
        path = sweep("constrained", spec, ds, [1.0, 2.0, 4.0], opts)
        samples = [(r.scale, r.log_loss) for r in path.records]
        directions = [r.theta.theta for r in path.records]
        report = pareto_cross_check(samples, tol=1e-4, spec=spec, ds=ds, directions=directions)
        assert report.passed
        assert all(abs(p.swapped_norm - p.rho) <= 1e-4 for p in report.points)


class TestMarginGapBound:
    """Test γ*(ρ) − γ(ρ, θ_c(ρ)) ≤ log N on seeded instances"""

    INSTANCES = [
        (2, 2, "linear", 0),
        (3, 2, "product_linear", 1),
        (5, 3, "linear", 2),
        (3, 3, "product_linear", 3),
        (5, 2, "linear", 4),
    ]

    @pytest.mark.slow
    @pytest.mark.parametrize("N,d,family,seed", INSTANCES)
    def test_gap_within_log_n(self, N, d, family, seed):
        ds = generate_dataset("separable_gaussian", d=d, N=N, seed=seed)
        spec = build_spec([{"family": family}], d)
        opts = SolverOptions(restarts=4, sweep_restarts=1, seed=seed)
        grid = geometric_grid(1.0, 2048.0, 12)
        constrained = sweep("constrained", spec, ds, grid, opts)
        margins = sweep("margin", spec, ds, grid, opts)
        for rec_c, rec_m in zip(constrained.records, margins.records):
            assert rec_c.theta_norm == pytest.approx(1.0, abs=1e-9)
            gap = max(rec_m.min_margin, rec_c.min_margin) - rec_c.min_margin
            assert gap <= np.log(N) + 1e-3
