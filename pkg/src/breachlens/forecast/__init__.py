"""Annual series construction, ARIMA, changepoint trend model and accuracy metrics."""
from .arima import (ArimaFit, AutoArimaResult, ForecastResult, arma_acovf, auto_arima,
                    fit_arima, forecast_arima, ndiffs_kpss, psi_weights)
from .kpss import KPSS_LEVEL_CRITICAL_5PCT, kpss_lags, kpss_stationarity
from .series import LAMBDA_GRID, AnnualSeries, BoxCox, aggregate_annual, boxcox, forecast_metrics
from .trend import TrendModel, fit_trend_model, forecast_trend

__all__ = [
    "AnnualSeries", "ArimaFit", "AutoArimaResult", "BoxCox", "ForecastResult", "KPSS_LEVEL_CRITICAL_5PCT",
    "LAMBDA_GRID", "TrendModel", "aggregate_annual", "arma_acovf", "auto_arima", "boxcox",
    "fit_arima", "fit_trend_model", "forecast_arima", "forecast_metrics", "forecast_trend",
    "kpss_lags", "kpss_stationarity", "ndiffs_kpss", "psi_weights",
]
