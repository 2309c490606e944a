import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import gamma as gamma_fn

from gstmar.distributions import (
    DefinitenessError,
    DomainError,
    MvnParams,
    MvtParams,
    cholesky_factor,
    logpdf,
    mvn_logpdf,
    mvn_pdf,
    mvt_logpdf,
    mvt_pdf,
    partition_conditional,
    t_cdf_1d,
    t_logpdf_1d,
)


def random_spd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T + d * 0.1 * np.eye(d)


class TestGaussian:
    def test_standard_normal_at_mode(self):
        assert mvn_pdf(0.0, MvnParams([0.0], [[1.0]])) == pytest.approx(0.3989422804014327, rel=1e-14)

    def test_density_at_mean(self, rng):
        for d in (1, 3, 6):
            cov = random_spd(rng, d)
            mu = rng.normal(size=d)
            expected = (2 * np.pi) ** (-d / 2) * np.linalg.det(cov) ** -0.5
            assert mvn_pdf(mu, MvnParams(mu, cov)) == pytest.approx(expected, rel=1e-12)

    def test_diagonal_is_product(self):
        x = np.array([1.0, 2.0])
        got = mvn_pdf(x, MvnParams([0.0, 0.0], np.diag([1.0, 4.0])))
        assert got == pytest.approx(stats.norm.pdf(1.0) * stats.norm.pdf(2.0, scale=2.0), rel=1e-13)

    def test_matches_scipy_rows(self, rng):
        cov = random_spd(rng, 4)
        mu = rng.normal(size=4)
        x = rng.normal(size=(20, 4))
        np.testing.assert_allclose(
            mvn_logpdf(x, MvnParams(mu, cov)), stats.multivariate_normal(mu, cov).logpdf(x), rtol=1e-12
        )


class TestStudentT:
    def test_univariate_normalizer(self):
        # C_1(4) = Gamma(2.5) / (Gamma(2) sqrt(2 pi)) = 0.75 / sqrt(2)
        got = mvt_pdf(0.0, MvtParams([0.0], [[1.0]], dof=4.0))
        assert got == pytest.approx(0.75 / np.sqrt(2.0), rel=1e-13)
        assert got == pytest.approx(0.530330, abs=1e-6)

    def test_bivariate_at_mean(self, rng):
        cov = random_spd(rng, 2)
        nu = 6.5
        c2 = gamma_fn((2 + nu) / 2) / (gamma_fn(nu / 2) * np.pi * (nu - 2))
        got = mvt_pdf(np.zeros(2), MvtParams(np.zeros(2), cov, dof=nu))
        assert got == pytest.approx(c2 * np.linalg.det(cov) ** -0.5, rel=1e-12)

    # relative gap grows like x**4 / (4 nu); beyond |x| ~ 4.5 it passes 1e-4
    @pytest.mark.parametrize("x", [-4.0, -0.4, 0.0, 1.7, 3.5])
    def test_gaussian_limit(self, x):
        t = mvt_pdf(x, MvtParams([0.0], [[1.0]], dof=1e6))
        n = mvn_pdf(x, MvnParams([0.0], [[1.0]]))
        assert t == pytest.approx(n, rel=1e-4)

    def test_covariance_parametrization(self, rng):
        # scaling a classical t by sqrt((nu-2)/nu) gives covariance cov
        cov = random_spd(rng, 3)
        nu = 5.0
        mu = rng.normal(size=3)
        x = rng.normal(size=(10, 3))
        ref = stats.multivariate_t(mu, cov * (nu - 2) / nu, df=nu).logpdf(x)
        np.testing.assert_allclose(mvt_logpdf(x, MvtParams(mu, cov, dof=nu)), ref, rtol=1e-12)

    def test_univariate_helpers_agree(self, rng):
        x = rng.normal(size=8)
        ref = mvt_logpdf(x[:, None], MvtParams([0.3], [[2.0]], dof=7.0))
        np.testing.assert_allclose(t_logpdf_1d(x, 0.3, 2.0, 7.0), ref, rtol=1e-13)

    def test_variance_is_covariance_parameter(self):
        params = MvtParams([0.0], [[2.5]], dof=5.0)
        second, _ = integrate.quad(lambda y: y * y * mvt_pdf(y, params), -np.inf, np.inf, epsabs=1e-11)
        assert second == pytest.approx(2.5, rel=1e-6)

    @pytest.mark.parametrize("nu", [2.0, 1.5, -1.0])
    def test_rejects_small_dof(self, nu):
        with pytest.raises(DomainError):
            MvtParams([0.0], [[1.0]], dof=nu)


class TestCdf:
    def test_symmetry(self):
        assert t_cdf_1d(1.3, 1.3, 0.7, 4.5) == 0.5

    def test_gaussian_limit(self):
        assert t_cdf_1d(1.96, 0.0, 1.0, 1e6) == pytest.approx(0.975, abs=1e-4)

    def test_quadrature(self):
        params = MvtParams([0.0], [[1.0]], dof=5.0)
        ref, _ = integrate.quad(lambda y: mvt_pdf(y, params), -np.inf, 1.0, epsabs=1e-13, epsrel=1e-13)
        assert t_cdf_1d(1.0, 0.0, 1.0, 5.0) == pytest.approx(ref, abs=1e-8)

    def test_domain(self):
        with pytest.raises(DomainError):
            t_cdf_1d(0.0, 0.0, 1.0, 2.0)
        with pytest.raises(DomainError):
            t_cdf_1d(0.0, 0.0, 0.0, 5.0)


class TestDefiniteness:
    def test_not_positive_definite(self):
        with pytest.raises(DefinitenessError, match="smallest eigenvalue"):
            MvnParams([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_numerically_singular(self):
        with pytest.raises(DefinitenessError, match="singular"):
            cholesky_factor([[1.0, 1.0], [1.0, 1.0 + 1e-14]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            MvnParams([0.0, 0.0], [[1.0]])


class TestPartition:
    def test_block_diagonal_gaussian(self):
        law = partition_conditional(MvnParams([1.0, -2.0], np.diag([2.0, 3.0])), 1)
        for x2 in (-5.0, 0.0, 4.0):
            cond = law.conditional([x2])
            assert cond.mean[0] == pytest.approx(1.0)
            assert cond.cov[0, 0] == pytest.approx(2.0)

    def test_correlated_pair(self):
        law = partition_conditional(MvnParams([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]]), 1)
        grid = np.linspace(-3, 3, 13)
        for x2 in grid:
            cond = law.conditional([x2])
            assert cond.mean[0] == pytest.approx(0.5 * x2, abs=1e-14)
            assert cond.cov[0, 0] == pytest.approx(0.75, abs=1e-14)
            for x1 in grid:
                joint = mvn_pdf([x1, x2], law.params)
                assert joint == pytest.approx(mvn_pdf([x1], cond) * mvn_pdf([x2], law.marginal2()), rel=1e-12)

    def test_t_at_conditioning_mean(self, rng):
        cov = random_spd(rng, 4)
        nu = 5.0
        law = partition_conditional(MvtParams(np.zeros(4), cov, dof=nu), 2)
        cond = law.conditional(np.zeros(2))
        schur = cov[:2, :2] - cov[:2, 2:] @ np.linalg.solve(cov[2:, 2:], cov[2:, :2])
        np.testing.assert_allclose(cond.cov, (nu - 2) / (nu - 2 + 2) * schur, rtol=1e-12)
        assert cond.dof == nu + 2

    def test_bad_split(self):
        with pytest.raises(ValueError):
            partition_conditional(MvnParams([0.0, 0.0], np.eye(2)), 2)

    @given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.booleans())
    def test_factorization_property(self, d, seed, use_t):
        rng = np.random.default_rng(seed)
        cov = random_spd(rng, d)
        mu = rng.normal(size=d)
        params = MvtParams(mu, cov, dof=2.5 + 20 * rng.random()) if use_t else MvnParams(mu, cov)
        d1 = int(rng.integers(1, d))
        law = partition_conditional(params, d1)
        x = mu + rng.normal(size=d) * 1.5
        joint = logpdf(x, params)
        split = logpdf(x[:d1], law.conditional(x[d1:])) + logpdf(x[d1:], law.marginal2())
        assert split == pytest.approx(joint, rel=1e-10, abs=1e-10)
