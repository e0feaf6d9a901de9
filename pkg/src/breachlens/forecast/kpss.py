from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError

KPSS_LEVEL_CRITICAL_5PCT = 0.463
KPSS_MIN_LENGTH = 8


def kpss_lags(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** 0.25))


def kpss_stationarity(series, regression: str = "level", lags: int | None = None) -> dict:
    """KPSS test of level stationarity with a Bartlett-window long-run variance.

    A constant series has zero long-run variance; its statistic is reported
    as 0 and it is treated as stationary.
    """
    if regression != "level":
        raise DomainError("only level-stationarity KPSS is implemented")
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < KPSS_MIN_LENGTH:
        raise DomainError(f"KPSS needs at least {KPSS_MIN_LENGTH} observations, got {n}")
    lags = kpss_lags(n) if lags is None else lags
    e = y - y.mean()
    s = np.cumsum(e)
    lrv = float(e @ e) / n
    for h in range(1, lags + 1):
        lrv += 2.0 * (1.0 - h / (lags + 1.0)) * float(e[h:] @ e[:-h]) / n
    if np.ptp(y) == 0 or lrv <= 0:
        stat = 0.0
    else:
        stat = float(s @ s) / (n * n * lrv)
    return {"statistic": stat, "lags": lags, "critical_5pct": KPSS_LEVEL_CRITICAL_5PCT,
            "reject_at_5pct": stat > KPSS_LEVEL_CRITICAL_5PCT}
