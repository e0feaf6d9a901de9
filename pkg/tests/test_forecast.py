import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import signal

from breachlens.errors import DegenerateFitError, DomainError
from breachlens.forecast import (BoxCox, aggregate_annual, auto_arima, boxcox, fit_arima, fit_trend_model,
                                 forecast_arima, forecast_metrics, forecast_trend, kpss_lags, kpss_stationarity,
                                 psi_weights)
from breachlens.forecast.trend import changepoint_grid


def ar1(seed, phi=0.8, n=200, burn=100, mu=0.0):
    e = np.random.default_rng(seed).normal(size=n + burn)
    return signal.lfilter([1.0], [1.0, -phi], e)[burn:] + mu


def ma1(seed, theta=0.5, n=300):
    e = np.random.default_rng(seed).normal(size=n + 1)
    return e[1:] + theta * e[:-1]


def kinked(n=20, at=8.0):
    t = np.arange(n, dtype=float)
    return 1.0 + 0.5 * t + 1.5 * np.maximum(t - at, 0.0)


# -- series and metrics -------------------------------------------------------

def incident(year, score):
    return SimpleNamespace(base=SimpleNamespace(year=year), get=lambda f: score)


def test_aggregate_annual():
    s = aggregate_annual([incident(2020, 1), incident(2020, 3), incident(2021, 2)])
    assert s.years == [2020, 2021] and s.values == [2.0, 2.0] and s.filled == [False, False]
    s = aggregate_annual([incident(2019, 4), incident(2021, 1)])
    assert s.years == [2019, 2020, 2021] and s.values == [4.0, 4.0, 1.0] and s.filled == [False, True, False]
    assert len(aggregate_annual([incident(2000, 1)])) == 1
    with pytest.raises(DomainError):
        aggregate_annual([])


def test_forecast_metrics():
    m = forecast_metrics([1, 2, 3], [2, 2, 2])
    assert m["mae"] == pytest.approx(2 / 3) and m["rmse"] == pytest.approx(math.sqrt(2 / 3))
    assert m["mape"] == pytest.approx(100 * (1 + 0 + 1 / 3) / 3)
    assert forecast_metrics([1, 2], [1, 2])["rmse"] == 0.0
    a, p = np.array([1.0, 0.0, 4.0]), np.array([2.0, 1.0, 3.0])
    m1, m2 = forecast_metrics(a, p), forecast_metrics(7 * a, 7 * p)
    assert m1["mape_skipped"] == 1
    assert m1["mape"] == pytest.approx(m2["mape"]) and m1["normalized_mae"] == pytest.approx(m2["normalized_mae"])
    with pytest.raises(DomainError):
        forecast_metrics([0, 0], [1, 1])


def test_boxcox():
    rng = np.random.default_rng(0)
    _, bc = boxcox(50 + rng.normal(size=400))
    assert abs(bc.lam - 1.0) <= 0.1 + 1e-12 or bc.lam >= 0.9
    x = np.exp(rng.normal(size=400))
    z, bc = boxcox(x)
    assert abs(bc.lam) <= 0.1 + 1e-12
    assert np.allclose(BoxCox(0.0).transform(x), np.log(x))
    for lam in (-0.5, 0.0, 0.7, 2.0):
        assert np.allclose(BoxCox(lam).inverse(BoxCox(lam).transform(x)), x, atol=1e-10, rtol=0)
    with pytest.raises(DomainError):
        boxcox([0.0, 1.0, 2.0])
    z, bc = boxcox([0.0, 1.0, 2.0], shift_to_positive=True)
    assert bc.shift == 1.0 and np.allclose(bc.inverse(z), [0, 1, 2])


# -- KPSS ---------------------------------------------------------------------

def test_kpss_examples():
    assert kpss_lags(100) == 4
    assert not kpss_stationarity(np.random.default_rng(0).normal(size=100))["reject_at_5pct"]
    rejects = sum(kpss_stationarity(np.cumsum(np.random.default_rng(s).normal(size=200)))["reject_at_5pct"]
                  for s in range(20))
    assert rejects / 20 > 0.9
    const = kpss_stationarity(np.full(20, 3.0))
    assert const["statistic"] == 0.0 and not const["reject_at_5pct"]
    with pytest.raises(DomainError):
        kpss_stationarity([1.0, 2.0, 3.0])


def test_kpss_matches_statsmodels():
    tsa = pytest.importorskip("statsmodels.tsa.stattools")
    import warnings
    for seed in range(5):
        y = ar1(seed, 0.5, n=120)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = tsa.kpss(y, regression="c", nlags=kpss_lags(120))[0]
        assert kpss_stationarity(y)["statistic"] == pytest.approx(ref, rel=1e-10)


# -- ARIMA --------------------------------------------------------------------

def test_white_noise_closed_form():
    y = np.random.default_rng(4).normal(2.0, 1.5, size=60)
    fit = fit_arima(y, (0, 0, 0), True)
    s2 = float(np.mean((y - y.mean()) ** 2))
    assert fit.intercept == pytest.approx(y.mean(), abs=1e-12)
    assert fit.sigma2 == pytest.approx(s2, rel=1e-12)
    assert fit.aic == pytest.approx(-2 * (-60 / 2 * (math.log(2 * math.pi * s2) + 1)) + 4, rel=1e-12)
    shifted = fit_arima(y + 123.0, (0, 0, 0), True)
    assert abs(shifted.aic - fit.aic) < 1e-8


def test_ar_ma_recovery():
    assert 0.65 <= fit_arima(ar1(0), (1, 0, 0), True).ar_coeffs[0] <= 0.95
    assert 0.35 <= fit_arima(ma1(0), (0, 0, 1), False).ma_coeffs[0] <= 0.65


def test_loglik_matches_statsmodels():
    sm = pytest.importorskip("statsmodels.tsa.arima.model")
    import warnings
    cases = [(ar1(1, 0.6, n=80, mu=3.0), (1, 0, 0), "c"), (ma1(2)[:90], (0, 0, 1), "n"),
             (ar1(3, 0.4, n=100), (1, 0, 1), "c"), (np.cumsum(ar1(5, 0.3, n=70)), (1, 1, 0), "n")]
    for y, order, trend in cases:
        ours = fit_arima(y, order, trend == "c")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = sm.ARIMA(y, order=order, trend=trend).fit()
        assert ours.loglik == pytest.approx(ref.llf, abs=1e-3)


def test_nested_loglik_improves():
    y = ar1(7, 0.5, n=120)
    assert fit_arima(y, (1, 0, 0)).loglik >= fit_arima(y, (0, 0, 0)).loglik


def test_degenerate_series():
    with pytest.raises(DegenerateFitError):
        fit_arima(np.full(30, 2.0), (0, 0, 0), True)
    with pytest.raises(DomainError):
        fit_arima([1.0, 2.0, 3.0], (2, 0, 2), True)


def test_auto_arima_selection():
    y = signal.lfilter([1.0], [1.0, -0.5, 0.3], np.random.default_rng(0).normal(size=400))[100:]
    res = auto_arima(y, return_trace=True)
    assert res.best.order[0] >= 1
    assert res.best.aic <= fit_arima(y, (0, res.d, 0), res.best.include_intercept).aic
    t = np.arange(60, dtype=float)
    trend = 0.5 * t + np.random.default_rng(1).normal(size=60)
    assert auto_arima(trend, return_trace=True).d >= 1


def test_auto_arima_deterministic():
    y = ar1(9, 0.6, n=80)
    a, b = auto_arima(y, return_trace=True), auto_arima(y, return_trace=True)
    assert a.best.to_dict() == b.best.to_dict() and a.visited == b.visited


def test_forecast_flat_and_ar1():
    y = np.random.default_rng(2).normal(size=40)
    fit = fit_arima(y, (0, 0, 0), True)
    fc = forecast_arima(fit, 5)
    sd = math.sqrt(fit.sigma2)
    assert all(p == fit.intercept for p in fc.point)
    assert np.allclose(fc.lower, fit.intercept - 1.959963984540054 * sd, rtol=0, atol=1e-12)
    assert fc.model_tag == "ARIMA(0,0,0)+intercept"
    fit = fit_arima(ar1(0), (1, 0, 0), True)
    fc = forecast_arima(fit, 30)
    mu, phi, x = fit.intercept, fit.ar_coeffs[0], fit.data[-1]
    assert fc.point[0] == pytest.approx(mu + phi * (x - mu), abs=1e-12)
    gaps = np.abs(np.asarray(fc.point) - mu)
    assert np.all(np.diff(gaps) <= 1e-15)
    assert all(lo <= p <= up for lo, p, up in zip(fc.lower, fc.point, fc.upper))


def test_psi_weights_random_walk():
    assert np.allclose(psi_weights([], [], 1, 4), [1, 1, 1, 1])
    assert np.allclose(psi_weights([0.5], [], 0, 4), [1, 0.5, 0.25, 0.125])
    assert np.allclose(psi_weights([], [0.3], 0, 3), [1, 0.3, 0])


# -- trend model ---------------------------------------------------------------

def test_changepoint_grid():
    assert np.allclose(changepoint_grid(11, 4), [2, 4, 6, 8])


def test_trend_line_and_constant():
    t = np.arange(15, dtype=float)
    for lam in (0.0, 1.0, None):
        m = fit_trend_model(2 * t + 1, l1_penalty=lam)
        assert m.base_slope == pytest.approx(2.0, abs=1e-6)
        assert np.max(np.abs(m.slope_deltas)) < 1e-6
        assert np.sqrt(np.mean((m.trend(t) - (2 * t + 1)) ** 2)) < 1e-6
    m = fit_trend_model(np.full(10, 4.0))
    assert m.base_slope == 0 and all(d == 0 for d in m.slope_deltas) and m.residual_sd == 0


def test_trend_kink_reconstruction_and_monotone_objective():
    y = kinked()
    m = fit_trend_model(y, l1_penalty=0.0)
    assert np.sqrt(np.mean((m.trend(np.arange(20)) - y) ** 2)) < 1e-6
    tr = m.objective_trace
    assert all(b <= a for a, b in zip(tr, tr[1:]))
    with pytest.raises(DomainError):
        fit_trend_model([1.0, 2.0, 3.0])


def test_trend_forecast_intervals():
    y = kinked() + np.random.default_rng(0).normal(0, 0.3, size=20)
    m = fit_trend_model(y, seed=5)
    f80 = forecast_trend(m, y, 6, level=0.80)
    f95 = forecast_trend(m, y, 6, level=0.95)
    assert f80.point == f95.point
    assert np.allclose(f80.point, m.trend(np.arange(20, 26)))
    w80 = np.subtract(f80.upper, f80.lower)
    w95 = np.subtract(f95.upper, f95.lower)
    assert np.all(w95 >= w80)
    for f in (f80, f95):
        assert all(lo <= p <= up for lo, p, up in zip(f.lower, f.point, f.upper))
    assert forecast_trend(m, y, 6).to_dict() == f80.to_dict()


def test_trend_forecast_collapses_without_uncertainty():
    t = np.arange(12, dtype=float)
    y = 3 - 0.5 * t
    m = fit_trend_model(y, l1_penalty=1.0)
    m.slope_deltas = [0.0] * len(m.slope_deltas)
    f = forecast_trend(m, y, 4)
    assert np.allclose(f.lower, f.point, atol=1e-9) and np.allclose(f.upper, f.point, atol=1e-9)
