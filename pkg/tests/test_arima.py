import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import simulate_arma
from panelcast.arima import (
    ArimaError,
    ArimaModel,
    ArimaOrder,
    FitError,
    auto_fit,
    difference,
    drift_model,
    fit_arma,
    forecast,
    read_models_csv,
    select_d,
    undifference,
    write_models_csv,
)


def ar1(phi, intercept=0.0):
    return ArimaModel(ArimaOrder(1, 0, 0), (phi,), (), intercept, 1.0, 0.0)


class TestDifference:
    def test_examples(self):
        np.testing.assert_array_equal(difference([1, 2, 3, 4], 1), [1, 1, 1])
        np.testing.assert_array_equal(difference([3, 1, 4], 0), [3, 1, 4])
        np.testing.assert_array_equal(difference([1, 4, 9, 16], 2), [2, 2])

    def test_too_short(self):
        with pytest.raises(ArimaError):
            difference([1, 2], 2)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20),
       st.lists(st.floats(-100, 100), min_size=1, max_size=10), st.sampled_from([1, 2]))
def test_undifference_roundtrip(history, diffs, d):
    levels = undifference(diffs, history, d)
    full = np.concatenate([history, levels])
    np.testing.assert_allclose(difference(full, d)[-len(diffs):], diffs, atol=1e-9)


class TestSelectD:
    def test_white_noise(self):
        assert select_d(np.random.default_rng(0).normal(size=40)) == 0

    def test_linear_trend(self):
        t = np.arange(40.0)
        for seed in range(5):
            assert select_d(2.0 * t + np.random.default_rng(seed).normal(0, 0.5, 40)) == 1

    def test_quadratic_trend(self):
        t = np.arange(40.0)
        for seed in range(5):
            assert select_d(0.5 * t ** 2 + np.random.default_rng(seed).normal(0, 0.5, 40)) == 2

    def test_too_short(self):
        with pytest.raises(ArimaError):
            select_d([1, 2, 3, 4, 5])


class TestFitArma:
    def test_ar1_recovery(self):
        est = [fit_arma(simulate_arma([0.8], [], 200, seed), 1, 0).ar_coeffs[0] for seed in range(10)]
        assert abs(np.mean(est) - 0.8) < 0.1

    def test_ma1_recovery(self):
        est = [fit_arma(simulate_arma([], [0.5], 400, seed), 0, 1).ma_coeffs[0] for seed in range(10)]
        assert abs(np.mean(est) - 0.5) < 0.15

    def test_white_noise_mean_model(self):
        x = np.random.default_rng(3).normal(5.0, 2.0, 60)
        m = fit_arma(x, 0, 0)
        assert m.intercept == pytest.approx(x.mean(), rel=1e-12)
        assert m.sigma2 == pytest.approx(x.var(), rel=1e-12)
        assert m.aic == pytest.approx(60 * math.log(x.var()) + 2, rel=1e-12)

    def test_too_short(self):
        with pytest.raises(FitError):
            fit_arma(np.arange(14.0), 1, 1)

    def test_constant_fails(self):
        with pytest.raises(FitError):
            fit_arma(np.ones(30), 1, 0)


class TestAutoFit:
    def test_linear_trend_differenced_once(self):
        t = np.arange(28.0)
        x = 3.0 * t + np.random.default_rng(1).normal(0, 1.0, 28)
        assert auto_fit(x).order.d == 1

    def test_white_noise(self):
        hits = 0
        for seed in range(10):
            x = np.random.default_rng(seed).normal(0, 1, 28)
            m = auto_fit(x)
            if (m.order.p, m.order.d, m.order.q) == (0, 0, 0):
                hits += 1
                np.testing.assert_allclose(forecast(m, x, 5), x.mean(), rtol=1e-12)
        assert hits >= 7

    def test_constant_series_falls_back(self):
        m = auto_fit(np.full(20, 4.2))
        assert m.fallback and m.order == ArimaOrder(0, 1, 0) and m.intercept == 0
        np.testing.assert_array_equal(forecast(m, np.full(20, 4.2), 5), np.full(5, 4.2))

    def test_exact_line_falls_back_to_drift(self):
        x = 1.5 * np.arange(15.0) + 2
        m = auto_fit(x)
        assert m.fallback
        np.testing.assert_allclose(forecast(m, x, 3), [24.5, 26.0, 27.5])

    def test_deterministic(self):
        x = simulate_arma([0.6], [0.3], 28, 4)
        assert auto_fit(x) == auto_fit(x)

    def test_tie_break_prefers_simpler(self):
        x = np.random.default_rng(2).normal(size=40)
        m = auto_fit(x)
        assert m.order.p + m.order.q <= 2


class TestForecast:
    def test_mean_model(self):
        m = ArimaModel(ArimaOrder(0, 0, 0), (), (), 7.0, 1.0, 0.0)
        np.testing.assert_array_equal(forecast(m, [1.0, 2.0], 4), [7.0] * 4)

    def test_drift(self):
        m = ArimaModel(ArimaOrder(0, 1, 0), (), (), 2.0, 0.0, math.nan, True)
        np.testing.assert_array_equal(forecast(m, [8.0, 10.0], 3), [12, 14, 16])
        assert drift_model([8.0, 10.0, 12.0]).intercept == 2.0

    def test_ar1_by_hand(self):
        np.testing.assert_allclose(forecast(ar1(0.5), [4.0], 3), [2, 1, 0.5])

    def test_ar1_geometric_decay(self):
        m = ar1(0.7, intercept=1.2)
        path = forecast(m, [10.0, 9.0, 12.0], 8)
        centered = path - m.mean
        ratios = centered[1:] / centered[:-1]
        np.testing.assert_allclose(ratios, 0.7, atol=1e-9)

    def test_ma_uses_last_innovation(self):
        m = ArimaModel(ArimaOrder(0, 0, 1), (), (0.5,), 0.0, 1.0, 0.0)
        # innovations over history: e0 = 2, e1 = 1 - 0.5 * 2 = 0
        np.testing.assert_allclose(forecast(m, [2.0, 1.0], 2), [0.0, 0.0])
        np.testing.assert_allclose(forecast(m, [2.0, 3.0], 2), [1.0, 0.0])

    def test_d2_integration(self):
        m = ArimaModel(ArimaOrder(0, 2, 0), (), (), 0.0, 1.0, 0.0)
        # zero second differences continue the last slope
        np.testing.assert_allclose(forecast(m, [1.0, 3.0, 6.0], 3), [9, 12, 15])

    def test_stochastic_paths_reproducible(self):
        m = ar1(0.5)
        a = forecast(m, [1.0], 5, rng=np.random.default_rng(3))
        b = forecast(m, [1.0], 5, rng=np.random.default_rng(3))
        assert np.array_equal(a, b)
        assert not np.allclose(a, forecast(m, [1.0], 5))

    def test_bad_horizon(self):
        with pytest.raises(ArimaError):
            forecast(ar1(0.5), [1.0], 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 12))
def test_forecast_length(seed, horizon):
    x = np.cumsum(np.random.default_rng(seed).normal(size=28))
    assert len(forecast(auto_fit(x), x, horizon)) == horizon


def test_parameter_recovery_median():
    est = [fit_arma(simulate_arma([0.7], [], 300, 100 + s), 1, 0).ar_coeffs[0] for s in range(20)]
    assert np.median(np.abs(np.array(est) - 0.7)) < 0.08


def test_models_csv_roundtrip(tmp_path):
    models = {
        "B": ArimaModel(ArimaOrder(2, 1, 1), (0.1, -0.2), (0.3,), 0.5, 1.25, -3.5),
        "A": drift_model([1.0, 2.0, 4.0]),
    }
    path = tmp_path / "models.csv"
    write_models_csv(models, path)
    back = read_models_csv(path)
    assert list(back) == ["A", "B"]
    assert back["B"] == models["B"]
    assert back["A"].fallback and math.isnan(back["A"].aic)
