"""
Unit tests for loss, margins and profiles
"""
import numpy as np
import pytest

from margin_paths.loss_margin import (
    exp_loss,
    log_loss_and_grad,
    margin,
    margin_profile,
    softmin_margin,
    support_set,
)
from margin_paths.predictor import Dataset, Linear, PredictorSpec, ProductLinear, build_spec, values

UNIT = np.array([1.0, 1.0]) / np.sqrt(2.0)


class TestExpLoss:
    """Test the exponential loss in log space"""

    def setup_method(self):
        self.ds = Dataset.from_samples([((1.0, 0.0), 1), ((0.0, 1.0), 1)])
        self.spec = PredictorSpec.of([Linear()], 2)

    def test_zero_margins(self):
        """Test N samples at margin 0 give loss N"""
        ds = Dataset.from_samples([((0.0,), 1), ((0.0,), 1), ((0.0,), -1)])
        spec = PredictorSpec.of([Linear()], 1)
        log_value, value = exp_loss(spec, np.array([1.0]), 1.0, ds)
        assert value == pytest.approx(3.0)
        assert log_value == pytest.approx(np.log(3.0))

    def test_symmetric_pair(self):
        log_value, value = exp_loss(self.spec, UNIT, 1.0, self.ds)
        assert value == pytest.approx(2.0 * np.exp(-1.0 / np.sqrt(2.0)))
        assert value == pytest.approx(0.98620, abs=1e-5)

    def test_no_underflow_at_large_scale(self):
        """Test log_value stays exact where value underflows"""
        log_value, value = exp_loss(self.spec, UNIT, 1e6, self.ds)
        assert value == 0.0
        assert log_value == pytest.approx(np.log(2.0) - 1e6 / np.sqrt(2.0))

    def test_sandwich(self):
        """Test margin − log N ≤ −log ℒ ≤ margin"""
        rng = np.random.default_rng(3)
        for _ in range(20):
            theta = rng.standard_normal(2)
            rho = float(rng.uniform(0.1, 50.0))
            gamma = margin(self.spec, theta, rho, self.ds)
            soft = softmin_margin(self.spec, theta, rho, self.ds)
            assert gamma - np.log(2.0) - 1e-12 <= soft <= gamma + 1e-12


class TestMargin:
    """Test margins and profiles"""

    def setup_method(self):
        self.ds = Dataset.from_samples([((1.0, 0.0), 1), ((0.0, 1.0), 1)])
        self.spec = PredictorSpec.of([Linear()], 2)

    def test_margin_symmetric(self):
        assert margin(self.spec, UNIT, 1.0, self.ds) == pytest.approx(1.0 / np.sqrt(2.0))

    def test_margin_scales_with_degree(self):
        assert margin(self.spec, UNIT, 2.0, self.ds) == pytest.approx(np.sqrt(2.0))

    def test_profile_ties_keep_index_order(self):
        profile = margin_profile(self.spec, UNIT, 1.0, self.ds)
        assert list(profile.perm) == [0, 1]

    def test_profile_lexicographic_demo(self):
        ds = Dataset.from_samples([((1.0, 0.0), 1), ((1.0, 1.0), 1)])
        profile = margin_profile(self.spec, np.array([1.0, 1.0]), 1.0, ds)
        assert np.allclose(profile.sorted_margins, [1.0, 2.0])
        assert list(profile.perm) == [0, 1]

    def test_profile_matches_naive_sort(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((3, 2))
        ds = Dataset(X=X, y=np.array([1.0, -1.0, 1.0]))
        theta = rng.standard_normal(2)
        profile = margin_profile(self.spec, theta, 1.3, ds)
        naive = sorted(1.3 * (ds.Z @ theta))
        assert np.allclose(profile.sorted_margins, naive)
        assert np.allclose(profile.raw(), 1.3 * (ds.Z @ theta))


class TestSupportAndGradient:
    """Test support sets and the smoothed objective"""

    def setup_method(self):
        self.ds = Dataset.from_samples([((1.0, 0.0), 1), ((0.0, 1.0), 1), ((2.0, 2.0), 1)])
        self.spec = PredictorSpec.of([Linear()], 2)

    def test_support_at_symmetric_point(self):
        support = support_set(self.spec, UNIT, self.ds)
        assert support.indices == (0, 1)
        assert len(support) == 2

    def test_support_against_external_level(self):
        support = support_set(self.spec, UNIT, self.ds, tol=1e-3, gamma_star=1.0)
        assert support.indices == ()

    def test_gradient_matches_finite_differences(self):
        theta = np.array([0.4, -0.2])
        for beta in (1.0, 25.0):
            _, g = log_loss_and_grad(self.spec, theta, 3.0, self.ds, beta=beta)
            h = 1e-6
            numeric = []
            for i in range(2):
                step = np.zeros(2)
                step[i] = h
                up = log_loss_and_grad(self.spec, theta + step, 3.0, self.ds, beta=beta)[0]
                down = log_loss_and_grad(self.spec, theta - step, 3.0, self.ds, beta=beta)[0]
                numeric.append((up - down) / (2.0 * h))
            assert np.allclose(g, numeric, atol=1e-6)

    def test_large_beta_approaches_min_margin(self):
        value, _ = log_loss_and_grad(self.spec, UNIT, 1.0, self.ds, beta=1e6)
        assert -value == pytest.approx(margin(self.spec, UNIT, 1.0, self.ds), abs=1e-5)


class TestRandomPoints:
    """Test loss and margin identities on random instances"""

    def setup_method(self):
        rng = np.random.default_rng(21)
        self.rng = rng
        self.ds = Dataset(X=rng.standard_normal((6, 2)), y=np.array([1.0, -1.0] * 3))
        self.specs = [
            PredictorSpec.of([Linear()], 2),
            PredictorSpec.of([ProductLinear(depth=2)], 2),
            build_spec([{"family": "linear"}, {"family": "power_lifted_linear", "p": 3}], 2),
        ]

    def test_sandwich(self):
        log_n = np.log(self.ds.n_samples)
        for _ in range(1000):
            spec = self.specs[int(self.rng.integers(len(self.specs)))]
            theta = self.rng.standard_normal(spec.total_dim)
            rho = float(self.rng.uniform(0.1, 20.0))
            gamma = margin(spec, theta, rho, self.ds)
            soft = softmin_margin(spec, theta, rho, self.ds)
            slack = 1e-9 * (1.0 + abs(gamma))
            assert gamma - log_n - slack <= soft <= gamma + slack

    def test_shifted_loss_matches_naive_sum(self):
        """Test the shifted log-sum-exp against log Σ exp(−f) where the sum is representable"""
        for spec in self.specs:
            for _ in range(50):
                theta = self.rng.standard_normal(spec.total_dim)
                rho = float(self.rng.uniform(0.1, 3.0))
                f = values(spec, rho * theta, self.ds)
                naive = float(np.log(np.sum(np.exp(-f))))
                log_value, value = exp_loss(spec, theta, rho, self.ds)
                assert log_value == pytest.approx(naive, abs=1e-12 * max(1.0, abs(naive)))
                assert value == pytest.approx(np.exp(naive), rel=1e-12)

    @pytest.mark.parametrize("depth", [2, 3])
    def test_margin_scales_as_rho_power(self, depth):
        spec = PredictorSpec.of([ProductLinear(depth=depth)], 2)
        for _ in range(50):
            theta = self.rng.standard_normal(spec.total_dim)
            rho = float(self.rng.uniform(0.1, 10.0))
            base = margin(spec, theta, 1.0, self.ds)
            scaled = margin(spec, theta, rho, self.ds)
            assert scaled == pytest.approx(rho**depth * base, rel=1e-12, abs=1e-12)
