import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

import reference_models as ref
from gstmar.diagnostics import (
    DegenerateInputError,
    SelectionConfig,
    convert_large_dof,
    diagnostic_panels,
    fit_report,
    information_criteria,
    quantile_residuals,
    residual_acf,
    sample_acf,
    select_model,
)
from gstmar.genetic import GaConfig
from gstmar.io import FIT_REPORT_SCHEMA
from gstmar.model import GStmarModel, ModelOrder
from gstmar.simulation import simulate

MIX = GStmarModel.from_arrays(1, 1, 1, [0.5, -1.0], [[0.6], [0.3]], [0.4, 1.5], [0.65, 0.35], [5.0])


class TestQuantileResiduals:
    def test_gaussian_ar_identity(self, rng):
        m = GStmarModel.from_arrays(2, 1, 0, [0.1], [[0.5, -0.2]], [0.7], [1.0])
        y = rng.normal(size=300)
        expected = (y[2:] - 0.1 - 0.5 * y[1:-1] + 0.2 * y[:-2]) / np.sqrt(0.7)
        np.testing.assert_allclose(quantile_residuals(m, y).values, expected, rtol=1e-9, atol=1e-12)

    def test_correct_model_is_normal(self):
        y = simulate(MIX, 2000, seed=12).paths[:, 0]
        qr = quantile_residuals(MIX, y)
        assert stats.kstest(qr.values, "norm").pvalue > 0.01
        assert stats.kstest(qr.pit, "uniform").pvalue > 0.01

    def test_extreme_observation_is_clipped(self):
        m = GStmarModel.from_arrays(1, 1, 0, [0.0], [[0.5]], [1.0], [1.0])
        qr = quantile_residuals(m, [0.0, 100.0, -100.0])
        assert np.all(np.isfinite(qr.values))
        assert qr.values[0] == pytest.approx(stats.norm.ppf(1 - 1e-12))


class TestAcf:
    def test_iid_small(self):
        x = np.random.default_rng(0).normal(size=10_000)
        assert np.all(np.abs(sample_acf(x, 20)) < 5 / np.sqrt(x.size))

    def test_constant_input(self):
        with pytest.raises(DegenerateInputError):
            sample_acf(np.full(50, 3.0), 5)

    def test_alternating(self):
        T = 101
        x = (-1.0) ** np.arange(T)
        d = x - x.mean()
        expected = (d[1:] @ d[:-1]) / (d @ d)
        assert sample_acf(x, 1)[0] == pytest.approx(expected, rel=1e-14)
        even = (-1.0) ** np.arange(100)
        assert sample_acf(even, 1)[0] == pytest.approx(-(100 - 1) / 100, rel=1e-14)

    def test_squared_degenerate_gives_nan(self):
        out = residual_acf((-1.0) ** np.arange(40), 4)
        assert np.all(np.isnan(out.acf_squared))
        assert out.band == pytest.approx(1.96 / np.sqrt(40))

    def test_lag_range(self):
        with pytest.raises(ValueError):
            sample_acf(np.arange(5.0), 5)


class TestInformationCriteria:
    def test_reference_row(self):
        ic = information_criteria(322.121, 25, 776)
        assert (round(ic.aic), round(ic.hqic), round(ic.bic)) == (-594, -549, -478)
        assert ic.aic == pytest.approx(-594.242, abs=1e-3)

    def test_two_regime_row(self):
        # with k = M(p+3) + M2 - 1 = 16 the reference row is matched exactly
        ic = information_criteria(309.165, 16, 776)
        assert (round(ic.aic), round(ic.hqic), round(ic.bic)) == (-586, -558, -512)
        assert abs(information_criteria(309.165, 17, 776).aic - (-586)) <= 3

    def test_shared_ar_row(self):
        ic = information_criteria(314.016, 15, 776)
        assert (round(ic.aic), round(ic.hqic), round(ic.bic)) == (-598, -571, -528)

    def test_hqic_unit_loglog(self):
        assert information_criteria(10.0, 1, np.e**np.e).hqic == pytest.approx(-18.0, rel=1e-15)

    @pytest.mark.parametrize("k, T", [(0, 100), (3, 1)])
    def test_invalid(self, k, T):
        with pytest.raises(ValueError):
            information_criteria(0.0, k, T)

    @given(st.floats(-1e4, 1e4), st.integers(1, 100), st.integers(16, 10**7))
    def test_penalty_order(self, ll, k, T):
        ic = information_criteria(ll, k, T)
        assert ic.bic > ic.hqic > ic.aic


class TestReport:
    def test_schema_and_content(self):
        y = simulate(ref.gstmar_512(), 781, seed=3).paths[:, 0]
        rep = fit_report(ref.gstmar_512(), y, std_errors=np.ones(25), hessian_ok=True)
        doc = json.loads(json.dumps(rep.to_dict()))
        jsonschema.validate(doc, FIT_REPORT_SCHEMA)
        assert doc["n_obs"] == 776 and doc["n_params"] == 25
        assert doc["acf_band"] == pytest.approx(1.96 / np.sqrt(776))
        assert round(doc["acf_band"], 4) == 0.0704
        assert "not a formal" in doc["normality_caveat"]

    def test_panels(self):
        y = simulate(MIX, 300, seed=5).paths[:, 0]
        rows = diagnostic_panels(MIX, y, 10)
        panels = {r[0] for r in rows}
        assert panels == {"residuals", "qq", "acf", "acf_squared", "mixing_weight_1", "mixing_weight_2"}
        acf_rows = [r for r in rows if r[0] == "acf"]
        assert len(acf_rows) == 10
        assert acf_rows[0][3] == pytest.approx(-1.96 / np.sqrt(299))
        w1 = np.array([r[2] for r in rows if r[0] == "mixing_weight_1"])
        w2 = np.array([r[2] for r in rows if r[0] == "mixing_weight_2"])
        np.testing.assert_allclose(w1 + w2, 1.0)
        qq = np.array([r[2] for r in rows if r[0] == "qq"])
        assert np.all(np.diff(qq) >= 0)

    def test_large_dof_flags(self):
        m = GStmarModel.from_arrays(1, 0, 2, [0, 0], [[0.5], [0.2]], [1, 2], [0.6, 0.4], [500.0, 5.0])
        y = simulate(m, 200, seed=0).paths[:, 0]
        assert fit_report(m, y).large_dof_flags == [True, False]


def test_convert_large_dof():
    m = GStmarModel.from_arrays(1, 1, 2, [0, 1, 2], [[0.5], [0.2], [0.1]], [1, 2, 3], [0.2, 0.5, 0.3],
                                [5.0, 1e5])
    g = convert_large_dof(m, 100)
    assert (g.order.m1, g.order.m2) == (2, 1)
    # Gaussian block re-ordered by alpha: the converted regime (0.3) comes first
    np.testing.assert_allclose(g.alphas, [0.3, 0.2, 0.5])
    assert g.regimes[0].phi0 == 2 and g.regimes[0].nu is None
    assert convert_large_dof(MIX) is MIX


class TestSelection:
    CFG = SelectionConfig(n_rounds=1, ga=GaConfig(seed=3, population_size=20, generations=15))

    def test_single_cell(self):
        y = simulate(MIX, 400, seed=1).paths[:, 0]
        trace = select_model(y, [1], [1], self.CFG)
        stmar = [c for c in trace.cells if c.source == "stmar"]
        assert len(stmar) == 1
        if not any(stmar[0].large_dof):
            assert trace.recommended is stmar[0]
        else:
            assert trace.recommended.source == "converted"

    def test_order_invariance(self):
        y = simulate(MIX, 300, seed=2).paths[:, 0]
        a = select_model(y, [1, 2], [1, 2], self.CFG)
        b = select_model(y, [2, 1], [2, 1], self.CFG)
        assert json.dumps(a.summary()) == json.dumps(b.summary())

    def test_gaussian_data_recommends_gaussian_model(self):
        g = GStmarModel.from_arrays(1, 1, 0, [0.3], [[0.6]], [1.0], [1.0])
        y = simulate(g, 30_000, seed=17).paths[:, 0]
        trace = select_model(y, [1], [1], SelectionConfig(n_rounds=1, ga=GaConfig(seed=1, population_size=20,
                                                                                  generations=20)))
        stmar = trace.cells[0]
        assert stmar.large_dof == [True]
        assert trace.recommended.order == ModelOrder(1, 1, 0)
        assert trace.recommended.source == "converted"

    def test_failed_cell_is_recorded(self):
        y = np.r_[np.ones(30), 2.0]
        trace = select_model(y, [1], [1, 2], SelectionConfig(n_rounds=1, ga=GaConfig(seed=0, population_size=4,
                                                                                    generations=2)))
        assert len(trace.cells) == 2
        assert any(c.error for c in trace.cells)

    def test_bad_criterion(self):
        with pytest.raises(ValueError):
            SelectionConfig(criterion="dic")

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            select_model(np.zeros(10), [], [1])
