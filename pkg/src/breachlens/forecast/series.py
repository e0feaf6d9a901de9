"""Annual severity series, Box-Cox transform and forecast accuracy metrics."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DomainError


@dataclass
class AnnualSeries:
    years: list[int]
    values: list[float]
    filled: list[bool]

    def __len__(self):
        return len(self.years)

    def slice_years(self, first: int | None = None, last: int | None = None) -> "AnnualSeries":
        keep = [i for i, y in enumerate(self.years)
                if (first is None or y >= first) and (last is None or y <= last)]
        return AnnualSeries([self.years[i] for i in keep], [self.values[i] for i in keep],
                            [self.filled[i] for i in keep])

    def to_rows(self) -> list[dict]:
        return [{"year": y, "value": v, "filled": f} for y, v, f in zip(self.years, self.values, self.filled)]


def aggregate_annual(incidents, value: str = "risk_terms_score") -> AnnualSeries:
    """Mean ``value`` per year; interior gap years carry the previous year forward."""
    by_year: dict[int, list[float]] = defaultdict(list)
    for inc in incidents:
        year = inc.base.year
        if isinstance(year, int) and year > 0:
            by_year[year].append(float(inc.get(value)))
    if not by_year:
        raise DomainError("no incidents with a valid year")
    years, values, filled = [], [], []
    for y in range(min(by_year), max(by_year) + 1):
        years.append(y)
        if y in by_year:
            values.append(float(np.mean(by_year[y])))
            filled.append(False)
        else:
            values.append(values[-1])
            filled.append(True)
    return AnnualSeries(years, values, filled)


def forecast_metrics(actual: Sequence[float], predicted: Sequence[float]) -> dict:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1 or a.size == 0:
        raise DomainError("actual and predicted must be equal non-empty vectors")
    err = a - p
    nz = a != 0
    if not nz.any():
        raise DomainError("MAPE is undefined when every actual value is zero")
    mae = float(np.mean(np.abs(err)))
    return {
        "mae": mae,
        "rmse": float(math.sqrt(np.mean(err ** 2))),
        "mape": float(100.0 * np.mean(np.abs(err[nz] / a[nz]))),
        "normalized_mae": mae / float(np.mean(np.abs(a[nz]))),
        "mape_skipped": int((~nz).sum()),
    }


LAMBDA_GRID = tuple(round(-1.0 + 0.1 * i, 1) for i in range(31))


@dataclass
class BoxCox:
    lam: float
    shift: float = 0.0

    def transform(self, values) -> np.ndarray:
        x = np.asarray(values, dtype=float) + self.shift
        if np.any(x <= 0):
            raise DomainError("Box-Cox requires strictly positive values")
        if self.lam == 0:
            return np.log(x)
        return (x ** self.lam - 1.0) / self.lam

    def inverse(self, values) -> np.ndarray:
        z = np.asarray(values, dtype=float)
        if self.lam == 0:
            x = np.exp(z)
        else:
            x = (self.lam * z + 1.0) ** (1.0 / self.lam)
        return x - self.shift


def boxcox_loglik(x: np.ndarray, lam: float) -> float:
    n = x.size
    z = np.log(x) if lam == 0 else (x ** lam - 1.0) / lam
    var = z.var()
    if var <= 0:
        return -math.inf
    return -n / 2.0 * math.log(var) + (lam - 1.0) * float(np.log(x).sum())


def boxcox(series, shift_to_positive: bool = False) -> tuple[np.ndarray, BoxCox]:
    """Choose lambda on the grid -1.0..2.0 (step 0.1) by profile likelihood."""
    x = np.asarray(series, dtype=float)
    shift = 1.0 - float(x.min()) if shift_to_positive else 0.0
    xs = x + shift
    if np.any(xs <= 0):
        raise DomainError("Box-Cox needs positive values; enable shift_to_positive")
    lls = [boxcox_loglik(xs, lam) for lam in LAMBDA_GRID]
    lam = LAMBDA_GRID[int(np.argmax(lls))]
    bc = BoxCox(lam, shift)
    return bc.transform(x), bc
