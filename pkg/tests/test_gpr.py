import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evars.errors import ConfigError, InputError
from evars.gpr import (
    KernelSpec,
    Linear,
    Periodic,
    SquaredExponential,
    fit_arrays,
    kernel_eval,
    kernel_from_dict,
    kernel_to_dict,
    log_marginal_likelihood,
    model_from_dict,
    model_to_dict,
    predict,
    predict_batch,
    refit_with_structure,
    rolling_origin_splits,
    tune_base_model,
)
from evars.timeseries import TimeSeriesDataset


def dense_predict(x_train, y_train, spec, x_star, mean_constant=0.0):
    """Brute-force oracle: explicit dense inverse of the noisy Gram matrix."""
    k = spec.kernel.gram(x_train, x_train) + spec.noise * np.eye(len(y_train))
    k_inv = np.linalg.inv(k)
    k_star = spec.kernel.gram(x_train, x_star[None, :])[:, 0]
    mean = mean_constant + k_star @ k_inv @ (y_train - mean_constant)
    prior = spec.kernel.gram(x_star[None, :], x_star[None, :])[0, 0]
    var = prior - k_star @ k_inv @ k_star
    return mean, max(var, 0.0)


def random_kernel(rng):
    se = SquaredExponential(variance=rng.uniform(0.5, 2.0),
                            length_scale=rng.uniform(0.5, 2.0))
    per = Periodic(variance=rng.uniform(0.5, 2.0),
                   length_scale=rng.uniform(0.5, 2.0),
                   period=rng.uniform(1.0, 4.0))
    return [se, per, se + per][rng.integers(3)]


class TestKernelEval:
    def test_se_zero_distance(self):
        spec = KernelSpec(SquaredExponential(1.0, 1.0), 0.0)
        assert kernel_eval(spec, [0.0, 0.0], [0.0, 0.0]) == pytest.approx(1.0)

    def test_se_closed_form(self):
        # squared distance 2 with unit length-scale: exp(-1)
        spec = KernelSpec(SquaredExponential(1.0, 1.0), 0.0)
        value = kernel_eval(spec, [0.0, 0.0], [1.0, 1.0])
        assert value == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_sum_composition(self):
        a = SquaredExponential(1.5, 1.0)
        b = Periodic(0.5, 1.0, 2.0)
        x1, x2 = np.array([0.3]), np.array([1.1])
        assert kernel_eval(KernelSpec(a + b, 0.0), x1, x2) == pytest.approx(
            kernel_eval(KernelSpec(a, 0.0), x1, x2)
            + kernel_eval(KernelSpec(b, 0.0), x1, x2))

    def test_dimension_mismatch(self):
        spec = KernelSpec(SquaredExponential(), 0.0)
        with pytest.raises(InputError):
            kernel_eval(spec, [0.0], [0.0, 1.0])

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2),
           st.lists(st.floats(-5, 5), min_size=2, max_size=2))
    @settings(max_examples=50, deadline=None)
    def test_symmetry(self, a, b):
        spec = KernelSpec(SquaredExponential(1.3, 0.7)
                          + Periodic(0.5, 1.1, 2.0), 0.0)
        assert kernel_eval(spec, a, b) == kernel_eval(spec, b, a)

    def test_positive_semidefinite_sampled_gram(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(15, 2))
        for kernel in (SquaredExponential(1.0, 0.8),
                       Periodic(1.0, 1.0, 2.0),
                       SquaredExponential() * Periodic(period=3.0),
                       SquaredExponential() + Linear(0.5, 0.1)):
            gram = kernel.gram(x, x)
            smallest = np.linalg.eigvalsh(0.5 * (gram + gram.T)).min()
            assert smallest >= -1e-8 * np.trace(gram)


class TestFit:
    def test_two_point_cholesky_by_hand(self):
        spec = KernelSpec(SquaredExponential(1.0, 1.0), 0.1)
        x = np.array([[0.0], [1.0]])
        y = np.array([1.0, 2.0])
        model = fit_arrays(x, y, spec)
        k01 = np.exp(-0.5)
        l00 = np.sqrt(1.1)
        l10 = k01 / l00
        l11 = np.sqrt(1.1 - l10**2)
        np.testing.assert_allclose(model.chol,
                                   [[l00, 0.0], [l10, l11]], rtol=1e-12)

    def test_zero_noise_jitter_rescue(self):
        spec = KernelSpec(SquaredExponential(1.0, 1.0), 0.0)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(30, 1))
        model = fit_arrays(x, rng.normal(size=30), spec)
        assert np.isfinite(model.alpha).all()

    def test_duplicate_rows_never_nonfinite(self):
        spec = KernelSpec(SquaredExponential(1.0, 1.0), 0.0)
        x = np.array([[1.0], [1.0], [2.0]])
        model = fit_arrays(x, np.array([1.0, 1.0, 2.0]), spec)
        assert np.isfinite(model.chol).all() and np.isfinite(model.alpha).all()

    def test_solve_residual_invariant(self):
        spec = KernelSpec(SquaredExponential(2.0, 1.5), 0.05)
        rng = np.random.default_rng(1)
        x = rng.normal(size=(12, 2))
        y = rng.normal(size=12)
        model = fit_arrays(x, y, spec, mean_constant=0.3)
        lhs = model.chol @ model.chol.T @ model.alpha
        np.testing.assert_allclose(lhs, y - 0.3, rtol=1e-8, atol=1e-8)


class TestPredict:
    def test_interpolation_limit(self):
        spec = KernelSpec(SquaredExponential(1.0, 1.0), 1e-10)
        x = np.array([[0.0], [1.0], [2.5]])
        y = np.array([0.3, -0.7, 1.2])
        model = fit_arrays(x, y, spec)
        mean, var = predict(model, [1.0])
        assert mean == pytest.approx(-0.7, abs=1e-6)
        assert var == pytest.approx(0.0, abs=1e-6)

    def test_prior_reversion_far_away(self):
        spec = KernelSpec(SquaredExponential(2.0, 0.5), 1e-6)
        x = np.array([[0.0], [1.0]])
        model = fit_arrays(x, np.array([5.0, 6.0]), spec, mean_constant=0.5)
        mean, var = predict(model, [100.0])
        assert mean == pytest.approx(0.5, abs=1e-8)
        assert var == pytest.approx(2.0, abs=1e-8)

    def test_two_point_dense_solve_oracle(self):
        spec = KernelSpec(SquaredExponential(1.0, 1.0), 0.2)
        x = np.array([[0.0], [1.0]])
        y = np.array([1.0, -1.0])
        model = fit_arrays(x, y, spec)
        x_star = np.array([0.4])
        mean, var = predict(model, x_star)
        want_mean, want_var = dense_predict(x, y, spec, x_star)
        assert mean == pytest.approx(want_mean, rel=1e-10)
        assert var == pytest.approx(want_var, rel=1e-10)

    def test_dense_oracle_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n = int(rng.integers(2, 9))
            d = int(rng.integers(1, 4))
            spec = KernelSpec(random_kernel(rng), float(rng.uniform(0.01, 0.5)))
            x = rng.normal(size=(n, d))
            y = rng.normal(size=n)
            model = fit_arrays(x, y, spec)
            x_star = rng.normal(size=d)
            mean, var = predict(model, x_star)
            want_mean, want_var = dense_predict(x, y, spec, x_star)
            assert mean == pytest.approx(want_mean, rel=1e-8, abs=1e-10)
            assert var == pytest.approx(want_var, rel=1e-8, abs=1e-10)

    def test_variance_never_exceeds_prior(self):
        rng = np.random.default_rng(11)
        spec = KernelSpec(SquaredExponential(1.7, 1.0), 0.1)
        x = rng.normal(size=(10, 1))
        model = fit_arrays(x, rng.normal(size=10), spec)
        stars = rng.normal(size=(40, 1))
        _, var = predict_batch(model, stars)
        assert (var >= 0.0).all()
        assert (var <= 1.7 + 1e-12).all()

    def test_information_monotonicity(self):
        rng = np.random.default_rng(13)
        spec = KernelSpec(SquaredExponential(1.0, 1.0), 0.1)
        x = rng.normal(size=(8, 1))
        y = rng.normal(size=8)
        small = fit_arrays(x[:7], y[:7], spec)
        big = fit_arrays(x, y, spec)
        stars = rng.normal(size=(20, 1))
        _, var_small = predict_batch(small, stars)
        _, var_big = predict_batch(big, stars)
        assert (var_big <= var_small + 1e-8).all()


class TestSerialization:
    def test_kernel_roundtrip(self):
        kernel = (SquaredExponential(1.3, 0.9)
                  + Periodic(0.4, 1.1, 6.0) * Linear(0.2, 0.5))
        assert kernel_from_dict(kernel_to_dict(kernel)) == kernel

    def test_model_roundtrip_parameters_exact(self):
        rng = np.random.default_rng(5)
        spec = KernelSpec(SquaredExponential(1.5, 0.8), 0.05)
        x = rng.normal(size=(10, 2))
        y = rng.normal(size=10)
        model = fit_arrays(x, y, spec, mean_constant=0.2)
        back = model_from_dict(model_to_dict(model))
        assert back.spec == model.spec
        assert back.mean_constant == model.mean_constant
        np.testing.assert_array_equal(back.x_train, model.x_train)
        mean0, var0 = predict(model, x[0])
        mean1, var1 = predict(back, x[0])
        assert mean0 == pytest.approx(mean1, rel=1e-12)
        assert var0 == pytest.approx(var1, rel=1e-9, abs=1e-12)


def sine_dataset(n=120, season=12, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    y = np.sin(2 * np.pi * t / season) + 2.0
    if noise:
        y = y + rng.normal(0, noise, n)
    x = np.column_stack([np.sin(2 * np.pi * t / season + 0.7),
                         np.cos(2 * np.pi * t / season)])
    return TimeSeriesDataset(t, x, y, season, ("x0", "x1"))


class TestTuning:
    def test_rolling_origin_respects_time_order(self):
        for train, val in rolling_origin_splits(100, 4):
            assert train.max() < val.min()

    def test_budget_one(self):
        ds = sine_dataset()
        model, candidate = tune_base_model(ds, budget=1, folds=3, seed=0)
        assert model.spec == candidate.spec

    def test_determinism(self):
        ds = sine_dataset()
        _, first = tune_base_model(ds, budget=8, folds=3, seed=42)
        _, second = tune_base_model(ds, budget=8, folds=3, seed=42)
        assert first.to_dict() == second.to_dict()

    def test_beats_constant_predictor_on_sine(self):
        ds = sine_dataset()
        model, _ = tune_base_model(ds, budget=30, folds=3, seed=1)
        preds, _ = predict_batch(model, ds.covariates)
        model_rmse = np.sqrt(np.mean((ds.target - preds) ** 2))
        constant_rmse = np.sqrt(np.mean((ds.target - ds.target.mean()) ** 2))
        assert model_rmse < constant_rmse

    def test_zero_budget_rejected(self):
        with pytest.raises(ConfigError):
            tune_base_model(sine_dataset(), budget=0)

    def test_refit_keeps_structure(self):
        ds = sine_dataset()
        model, candidate = tune_base_model(ds, budget=5, folds=3, seed=0)
        refit = refit_with_structure(candidate, ds, budget=5, seed=1)
        assert type(refit.spec.kernel) is type(candidate.spec.kernel)
        assert log_marginal_likelihood(refit) >= \
            log_marginal_likelihood(model) - 1e-9
