import numpy as np
import pytest
from scipy import integrate, stats

import reference_models as ref
from gstmar.distributions import t_cdf_1d
from gstmar.model import GStmarModel, conditional_moments, stationary_density, unconditional_moments
from gstmar.simulation import forecast, sample_stationary_init, simulate


def stationary_cdf_p1(model, x):
    """Marginal CDF of one observation: mixture of regime Gaussian / t CDFs."""
    out = np.zeros_like(np.asarray(x, dtype=float))
    for a, mom, reg in zip(model.alphas, model.moments, model.regimes):
        if reg.is_t:
            out += a * t_cdf_1d(x, mom.mean, mom.gamma[0], reg.nu)
        else:
            out += a * stats.norm.cdf(x, mom.mean, np.sqrt(mom.gamma[0]))
    return out


def batch_mean_se(per_path):
    """Mean and standard error across independent paths."""
    return per_path.mean(), per_path.std(ddof=1) / np.sqrt(per_path.size)


MIX = GStmarModel.from_arrays(1, 1, 1, [0.5, -1.0], [[0.6], [0.3]], [0.4, 1.5], [0.65, 0.35], [5.0])


def test_stationary_cdf_helper():
    x = 0.3
    quad, _ = integrate.quad(lambda y: stationary_density(MIX, [y]), -np.inf, x, epsabs=1e-12)
    assert stationary_cdf_p1(MIX, x) == pytest.approx(quad, abs=1e-9)


class TestSimulate:
    def test_ar1_variance(self):
        m = GStmarModel.from_arrays(1, 1, 0, [0.0], [[0.5]], [1.0], [1.0])
        sim = simulate(m, 1000, n_paths=1000, seed=1)
        mean, se = batch_mean_se(np.mean(sim.paths**2, axis=0))
        assert abs(mean - 4 / 3) < 4 * se

    def test_degenerate_path_is_constant(self):
        m = GStmarModel.from_arrays(1, 1, 0, [2.5], [[0.0]], [1e-16], [1.0])
        sim = simulate(m, 50, seed=0)
        np.testing.assert_allclose(sim.paths, 2.5, atol=1e-6)

    def test_regime_frequencies(self):
        sim = simulate(MIX, 1000, n_paths=1000, seed=2)
        for m, a in enumerate(MIX.alphas):
            mean, se = batch_mean_se(np.mean(sim.regimes == m, axis=0))
            assert abs(mean - a) < 4 * se

    def test_seed_determinism(self):
        a = simulate(ref.gstmar_512(), 100, n_paths=3, seed=7)
        b = simulate(ref.gstmar_512(), 100, n_paths=3, seed=7)
        np.testing.assert_array_equal(a.paths, b.paths)
        np.testing.assert_array_equal(a.regimes, b.regimes)
        c = simulate(ref.gstmar_512(), 100, n_paths=3, seed=8)
        assert not np.array_equal(a.paths, c.paths)

    def test_fixed_init(self):
        init = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        sim = simulate(ref.gstmar_512(), 5, n_paths=2, init=init, seed=0)
        np.testing.assert_array_equal(sim.init[:, 0], init)
        np.testing.assert_allclose(sim.weights.sum(axis=2), 1.0)
        assert sim.paths.shape == (5, 2) and sim.weights.shape == (5, 2, 3)

    @pytest.mark.parametrize("kw", [{"length": 0}, {"length": 5, "n_paths": 0}, {"length": 5, "init": [0.0, 1.0]},
                                    {"length": 5, "init": "warm"}])
    def test_bad_arguments(self, kw):
        with pytest.raises(ValueError):
            simulate(MIX, **kw)

    def test_first_step_uses_conditional_law(self):
        init = np.array([0.4])
        sim = simulate(MIX, 1, n_paths=200_000, init=init, seed=3)
        mom = conditional_moments(MIX, init[::-1])
        assert abs(sim.paths.mean() - mom.mean) < 4 * np.sqrt(mom.variance / 200_000)
        assert sim.paths.var() == pytest.approx(mom.variance, rel=0.02)


class TestStationaryInit:
    def test_gaussian_ar1(self):
        m = GStmarModel.from_arrays(1, 1, 0, [0.4], [[0.6]], [0.9], [1.0])
        x = sample_stationary_init(m, np.random.default_rng(0), size=1_000_000)[:, 0]
        mu, g0 = 1.0, 0.9 / 0.64
        assert abs(x.mean() - mu) < 4 * np.sqrt(g0 / x.size)
        var_se = g0 * np.sqrt(2 / x.size)
        assert abs(x.var() - g0) < 4 * var_se

    def test_large_dof_kurtosis(self):
        m = GStmarModel.from_arrays(1, 0, 1, [0.0], [[0.3]], [1.0], [1.0], [1e6])
        x = sample_stationary_init(m, np.random.default_rng(1), size=1_000_000)[:, 0]
        assert stats.kurtosis(x, fisher=False) == pytest.approx(3.0, abs=4 * np.sqrt(24 / x.size))

    def test_mixture_ks(self):
        x = sample_stationary_init(MIX, np.random.default_rng(2), size=1_000_000)[:, 0]
        ks = stats.kstest(x, lambda v: stationary_cdf_p1(MIX, v)).statistic
        assert ks < 0.005

    def test_window_covariance(self):
        m = GStmarModel.from_arrays(2, 1, 1, [0.3, -0.5], [[0.5, 0.2], [0.7, -0.3]], [0.6, 1.0], [0.4, 0.6], [9.0])
        x = sample_stationary_init(m, np.random.default_rng(3), size=400_000)
        assert x.shape == (400_000, 2)
        u = unconditional_moments(m)
        assert x.mean() == pytest.approx(u.mean, abs=0.01)
        np.testing.assert_allclose(np.cov(x.T), [[u.gamma[0], u.gamma[1]], [u.gamma[1], u.gamma[0]]], rtol=0.02)

    def test_single_draw_shape(self):
        assert sample_stationary_init(ref.gstmar_512(), 0).shape == (5,)


class TestForecast:
    def test_one_step_gaussian(self):
        m = GStmarModel.from_arrays(2, 1, 0, [0.2], [[0.5, 0.1]], [0.5], [1.0])
        hist = np.array([1.0, 2.0])
        fc = forecast(m, hist, 1, n_paths=20_000, seed=0)
        expected = 0.2 + 0.5 * 2.0 + 0.1 * 1.0
        assert abs(fc.mean[0] - expected) < 4 * np.sqrt(0.5 / 20_000)

    def test_one_step_mixture(self):
        m = ref.gstmar_512()
        hist = np.array([-0.3, 0.2, 0.5, -0.1, 0.4])
        fc = forecast(m, hist, 1, n_paths=100_000, seed=1)
        mom = conditional_moments(m, hist[::-1])
        assert abs(fc.mean[0] - mom.mean) < 4 * np.sqrt(mom.variance / 100_000)

    def test_bands_collapse(self):
        m = GStmarModel.from_arrays(1, 1, 0, [1.0], [[0.5]], [1e-14], [1.0])
        fc = forecast(m, [4.0], 4, n_paths=50, seed=0)
        expected = [3.0, 2.5, 2.25, 2.125]
        np.testing.assert_allclose(fc.mean, expected, atol=1e-5)
        np.testing.assert_allclose(fc.quantiles, np.tile(np.array(expected)[:, None], (1, 5)), atol=1e-5)

    def test_quantiles_ordered(self):
        fc = forecast(MIX, [0.0], 6, n_paths=2000, seed=4)
        assert np.all(np.diff(fc.quantiles, axis=1) >= 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            forecast(MIX, [0.0], 0)
        with pytest.raises(ValueError):
            forecast(MIX, [0.0], 3, quantiles=[0.5, 1.0])
        with pytest.raises(ValueError):
            forecast(ref.gstmar_512(), [0.0, 1.0], 3)
