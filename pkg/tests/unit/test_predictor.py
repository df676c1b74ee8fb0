"""
Unit tests for prediction-function families and specs
"""
import numpy as np
import pytest

from margin_paths.errors import DomainError, UnsupportedFamily
from margin_paths.predictor import (
    Dataset,
    Linear,
    LogWrap,
    ParamPoint,
    PowerLiftedLinear,
    PowerLogWrap,
    PredictorSpec,
    ProductLinear,
    SquaredBias,
    build_spec,
    check_homogeneity,
    evaluate,
    grad,
    grad_fd_check,
    squared_bias_spec,
    values,
)


def pair():
    return Dataset.from_samples([((1.0, 0.0), 1), ((0.0, 1.0), 1)])


class TestDataset:
    """Test dataset construction"""

    def test_signed_vectors(self):
        """Test z_n = y_n x_n is cached"""
        ds = Dataset.from_samples([((1.0, 2.0), -1), ((3.0, 4.0), 1)])
        assert ds.n_samples == 2
        assert ds.dim == 2
        assert np.allclose(ds.Z, [[-1.0, -2.0], [3.0, 4.0]])

    def test_rejects_bad_labels(self):
        """Test labels outside {-1, +1}"""
        with pytest.raises(ValueError):
            Dataset.from_samples([((1.0,), 0)])

    def test_arrays_are_read_only(self):
        """Test the cached arrays cannot be mutated"""
        ds = pair()
        with pytest.raises(ValueError):
            ds.Z[0, 0] = 5.0


class TestFamilies:
    """Test per-family evaluation"""

    def test_linear(self):
        spec = PredictorSpec.of([Linear()], 2)
        assert evaluate(spec, np.array([2.0, 3.0]), pair(), 0) == 2.0
        assert np.allclose(grad(spec, np.array([2.0, 3.0]), pair(), 1), [0.0, 1.0])

    def test_power_lifted_linear(self):
        """Test y⟨θ^⊙p, x⟩ with p = 2"""
        ds = Dataset.from_samples([((1.0, 1.0), 1)])
        spec = PredictorSpec.of([PowerLiftedLinear(p=2)], 2)
        assert evaluate(spec, np.array([1.0, 2.0]), ds, 0) == pytest.approx(5.0)
        assert np.allclose(grad(spec, np.array([1.0, 2.0]), ds, 0), [2.0, 4.0])

    def test_power_lifted_linear_rejects_fractional_power(self):
        with pytest.raises(ValueError):
            PowerLiftedLinear(p=1.5)

    def test_product_linear(self):
        """Test s · vᵀz for depth 2"""
        spec = PredictorSpec.of([ProductLinear(depth=2)], 2)
        assert spec.total_dim == 3
        theta = np.array([2.0, 1.0, 3.0])
        assert evaluate(spec, theta, pair(), 1) == pytest.approx(6.0)
        assert np.allclose(grad(spec, theta, pair(), 1), [3.0, 0.0, 2.0])

    def test_squared_bias_sign_follows_label(self):
        ds = Dataset.from_samples([((1.0,), 1), ((1.0,), -1)])
        spec = squared_bias_spec(1)
        theta = np.array([0.0, 3.0])
        assert np.allclose(values(spec, theta, ds), [9.0, -9.0])

    def test_log_wrap_domain(self):
        """Test θᵀz_n <= 0 raises DomainError"""
        spec = PredictorSpec.of([LogWrap()], 2)
        with pytest.raises(DomainError):
            values(spec, np.array([1.0, -1.0]), pair())
        assert evaluate(spec, np.array([1.0, 1.0]), pair(), 0) == pytest.approx(0.0)

    def test_power_log_wrap_keeps_sign(self):
        """Test sign(l)|l|^{1+ε} below and above 1"""
        spec = PredictorSpec.of([PowerLogWrap(eps=1.0)], 2)
        f = values(spec, np.array([np.e, 1.0 / np.e]), pair())
        assert f[0] == pytest.approx(1.0)
        assert f[1] == pytest.approx(-1.0)

    def test_batched_values(self):
        """Test a leading batch axis gives (batch, N)"""
        spec = PredictorSpec.of([ProductLinear(depth=2)], 2)
        batch = np.array([[1.0, 1.0, 0.0], [2.0, 0.0, 1.0]])
        out = values(spec, batch, pair())
        assert out.shape == (2, 2)
        assert np.allclose(out, [[1.0, 0.0], [0.0, 2.0]])


class TestPredictorSpec:
    """Test spec validation"""

    def test_degrees_must_increase(self):
        with pytest.raises(ValueError):
            PredictorSpec.of([ProductLinear(depth=2), Linear()], 2)

    def test_equal_degrees_rejected(self):
        """Test two blocks of the same degree"""
        with pytest.raises(ValueError):
            PredictorSpec.of([Linear(), Linear()], 2)

    def test_degree_mutation_rejected(self):
        """Test a later block whose degree is lowered below its predecessor"""
        spec = build_spec([{"family": "linear"}, {"family": "power_lifted_linear", "p": 3}], 2)
        assert [float(d) for d in spec.degrees] == [1.0, 3.0]
        mutated = [{"family": "power_lifted_linear", "p": 3}, {"family": "product_linear", "depth": 2}]
        with pytest.raises(ValueError):
            build_spec(mutated, 2)

    def test_log_family_single_block_only(self):
        with pytest.raises(UnsupportedFamily):
            PredictorSpec.of([LogWrap(), Linear()], 2)

    def test_unknown_family(self):
        with pytest.raises(UnsupportedFamily):
            build_spec([{"family": "relu"}], 2)

    def test_offsets_partition(self):
        spec = build_spec([{"family": "linear"}, {"family": "product_linear", "depth": 3}], 2)
        assert spec.offsets == ((0, 2), (2, 6))
        point = ParamPoint.for_spec(spec, np.arange(6.0))
        assert np.allclose(point.block(1), [2.0, 3.0, 4.0, 5.0])

    def test_param_point_length_mismatch(self):
        spec = PredictorSpec.of([Linear()], 2)
        with pytest.raises(ValueError):
            ParamPoint.for_spec(spec, np.ones(3))

    def test_param_point_norms(self):
        spec = PredictorSpec.of([Linear()], 2)
        theta = np.array([3.0, -4.0])
        assert ParamPoint.for_spec(spec, theta, "L2").norm() == pytest.approx(5.0)
        assert ParamPoint.for_spec(spec, theta, "L1").norm() == pytest.approx(7.0)
        assert ParamPoint.for_spec(spec, theta, "Linf").norm() == pytest.approx(4.0)

    def test_index_out_of_range(self):
        spec = PredictorSpec.of([Linear()], 2)
        with pytest.raises(IndexError):
            evaluate(spec, np.ones(2), pair(), 2)


class TestChecks:
    """Test homogeneity and finite-difference checks"""

    def test_homogeneity_of_ensemble(self):
        spec = build_spec([{"family": "linear"}, {"family": "product_linear", "depth": 2}], 2)
        theta = np.array([0.3, -0.2, 1.1, 0.4, 0.7])
        report = check_homogeneity(spec, theta, 3.0, pair(), 0)
        assert report.passed

    def test_homogeneity_rejects_log_family(self):
        spec = PredictorSpec.of([LogWrap()], 2)
        with pytest.raises(UnsupportedFamily):
            check_homogeneity(spec, np.ones(2), 2.0, pair(), 0)

    def test_gradient_matches_finite_differences(self):
        ds = Dataset.from_samples([((1.0, 0.5), 1), ((-0.3, 2.0), -1)])
        spec = build_spec([{"family": "linear"}, {"family": "product_linear", "depth": 3}], 2)
        theta = np.array([0.5, -0.1, 0.8, 1.2, 0.3, -0.6])
        for n in range(ds.n_samples):
            report = grad_fd_check(spec, theta, ds, n, tol=1e-7)
            assert report.passed

    def test_log_gradient_matches_finite_differences(self):
        spec = PredictorSpec.of([PowerLogWrap(eps=0.5)], 2)
        report = grad_fd_check(spec, np.array([2.0, 3.0]), pair(), 1, tol=1e-6, relative=True)
        assert report.passed


HOMOGENEOUS_FAMILIES = [
    Linear(),
    PowerLiftedLinear(p=2),
    PowerLiftedLinear(p=3),
    ProductLinear(depth=2),
    ProductLinear(depth=3),
    SquaredBias(),
]
LOG_FAMILIES = [LogWrap(), PowerLogWrap(eps=1.0)]


def mixed_samples(rng, n=5, d=3):
    X = rng.standard_normal((n, d))
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return Dataset(X=X, y=y)


class TestFamilyProperties:
    """Test gradients and scaling on random points for every family"""

    @pytest.mark.parametrize("family", HOMOGENEOUS_FAMILIES, ids=lambda f: f"{f.name}-{f.degree}")
    def test_gradient_on_random_points(self, family):
        rng = np.random.default_rng(11)
        ds = mixed_samples(rng)
        spec = PredictorSpec.of([family], ds.dim)
        for _ in range(100):
            theta = rng.standard_normal(spec.total_dim)
            n = int(rng.integers(ds.n_samples))
            report = grad_fd_check(spec, theta, ds, n, tol=1e-5, relative=True)
            assert report.passed, report

    @pytest.mark.parametrize("family", LOG_FAMILIES, ids=lambda f: f.name)
    def test_log_gradient_on_random_points(self, family):
        rng = np.random.default_rng(12)
        ds = Dataset(X=rng.uniform(0.2, 1.5, size=(4, 3)), y=np.ones(4))
        spec = PredictorSpec.of([family], ds.dim)
        for _ in range(100):
            theta = rng.uniform(0.1, 2.0, size=3)
            n = int(rng.integers(ds.n_samples))
            report = grad_fd_check(spec, theta, ds, n, tol=1e-5, relative=True)
            assert report.passed, report

    @pytest.mark.parametrize("family", HOMOGENEOUS_FAMILIES, ids=lambda f: f"{f.name}-{f.degree}")
    @pytest.mark.parametrize("rho", [0.5, 2.0, 10.0])
    def test_homogeneity_on_random_points(self, family, rho):
        rng = np.random.default_rng(13)
        ds = mixed_samples(rng)
        spec = PredictorSpec.of([family], ds.dim)
        for _ in range(20):
            theta = rng.standard_normal(spec.total_dim)
            for n in range(ds.n_samples):
                assert check_homogeneity(spec, theta, rho, ds, n).passed

    def test_squared_bias_ignores_sign(self):
        """Test b and −b give the same predictions"""
        rng = np.random.default_rng(14)
        ds = mixed_samples(rng, d=2)
        spec = squared_bias_spec(2)
        for _ in range(20):
            theta = rng.standard_normal(spec.total_dim)
            flipped = theta.copy()
            flipped[-1] = -flipped[-1]
            assert np.array_equal(values(spec, theta, ds), values(spec, flipped, ds))
