"""Hypothesis tests, correlation, IQR outliers and EDA aggregations."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from itertools import combinations
from statistics import NormalDist
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import DomainError

DEFAULT_ALPHA = 0.05
EXACT_MWU_MAX_N = 12


@dataclass
class TestResult:
    statistic: float
    p_value: float
    method: str
    alpha: float = DEFAULT_ALPHA
    df: float | tuple[float, float] | None = None
    diagnostics: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> dict:
        d = asdict(self)
        d["df"] = list(self.df) if isinstance(self.df, tuple) else self.df
        d["significant"] = self.significant
        d["statistic"] = _json_float(self.statistic)
        return d


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class OutlierReport:
    column: str
    q1: float
    q3: float
    lower: float
    upper: float
    outlier_indices: list[int]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CorrelationMatrix:
    columns: list[str]
    r: np.ndarray
    excluded: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"columns": self.columns, "r": self.r.tolist(), "excluded": self.excluded}


# -- quantiles and outliers --------------------------------------------------

def quantile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile at rank ``q * (n - 1)`` of the sorted data."""
    if len(values) == 0:
        raise DomainError("quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q}")
    xs = sorted(float(v) for v in values)
    pos = q * (len(xs) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(xs) - 1)
    frac = pos - lo
    return xs[lo] + frac * (xs[hi] - xs[lo])


def iqr_outliers(values: Sequence[float], column: str = "") -> OutlierReport:
    if len(values) == 0:
        raise DomainError("IQR outliers of an empty sample")
    q1, q3 = quantile(values, 0.25), quantile(values, 0.75)
    iqr = q3 - q1
    lower, upper = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    idx = [i for i, v in enumerate(values) if v < lower or v > upper]
    return OutlierReport(column, q1, q3, lower, upper, idx)


# -- ranks ------------------------------------------------------------------

def rankdata(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties given their average rank."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _tie_sizes(values: Iterable[float]) -> np.ndarray:
    return np.array([c for c in Counter(float(v) for v in values).values() if c > 1], dtype=float)


# -- tail probabilities -----------------------------------------------------

def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper tail of the F distribution via the regularized incomplete beta."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def chi2_sf(x: float, k: float) -> float:
    """Upper tail of the chi-square distribution via the regularized incomplete gamma."""
    if x <= 0:
        return 1.0
    return float(special.gammaincc(k / 2.0, x / 2.0))


def _clip_p(p: float) -> float:
    return min(1.0, max(0.0, p))


# -- tests ------------------------------------------------------------------

def _check_groups(groups) -> list[np.ndarray]:
    gs = [np.asarray(g, dtype=float) for g in groups]
    if len(gs) < 2:
        raise DomainError("at least two groups are required")
    for i, g in enumerate(gs):
        if g.size == 0:
            raise DomainError(f"group {i} is empty")
    return gs


def anova_oneway(groups: Sequence[Sequence[float]], alpha: float = DEFAULT_ALPHA) -> TestResult:
    gs = _check_groups(groups)
    k = len(gs)
    n = sum(g.size for g in gs)
    if n <= k:
        raise DomainError("one-way ANOVA needs more observations than groups")
    grand = np.concatenate(gs).mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in gs)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in gs)
    df1, df2 = k - 1, n - k
    ms_between, ms_within = ss_between / df1, ss_within / df2
    diag = {"ss_between": ss_between, "ss_within": ss_within}
    if ms_within == 0:
        stat, p = (math.inf, 0.0) if ms_between > 0 else (0.0, 1.0)
    else:
        stat = ms_between / ms_within
        p = f_sf(stat, df1, df2)
    return TestResult(float(stat), _clip_p(p), "anova", alpha, (float(df1), float(df2)), diag)


def kruskal_wallis(groups: Sequence[Sequence[float]], alpha: float = DEFAULT_ALPHA) -> TestResult:
    gs = _check_groups(groups)
    pooled = np.concatenate(gs)
    n = pooled.size
    ranks = rankdata(pooled)
    h, start = 0.0, 0
    for g in gs:
        r = ranks[start:start + g.size].sum()
        h += r * r / g.size
        start += g.size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    t = _tie_sizes(pooled)
    correction = 1.0 - float(((t ** 3) - t).sum()) / (n ** 3 - n)
    df = len(gs) - 1
    if correction <= 0:
        return TestResult(0.0, 1.0, "kruskal_wallis", alpha, float(df), {"tie_correction": 0.0})
    h /= correction
    h = max(h, 0.0)
    return TestResult(float(h), _clip_p(chi2_sf(h, df)), "kruskal_wallis", alpha, float(df),
                      {"tie_correction": correction})


def mann_whitney_exact_sf(u: float, n1: int, n2: int) -> float:
    """Two-sided exact p-value of U for untied samples by counting rank subsets.

    The null distribution is tabulated by dynamic programming over the number
    of ways ``k`` of the first ``i`` ranks can be chosen with a given U.
    """
    n = n1 + n2
    max_u = n1 * n2
    # ways[k][u]: subsets of size k (from ranks seen so far) with given U contribution
    ways = np.zeros((n1 + 1, max_u + 1), dtype=object)
    ways[0][0] = 1
    for i in range(n):
        # rank i (0-based) chosen as the k-th member contributes (i - k) wins over the other sample
        for k in range(min(i, n1 - 1), -1, -1):
            shift = i - k
            if shift > n2:
                continue
            row = ways[k]
            ways[k + 1][shift:] = ways[k + 1][shift:] + row[:max_u + 1 - shift]
    dist = ways[n1].astype(float)
    total = math.comb(n, n1)
    cdf_le = dist[: int(math.floor(u)) + 1].sum() / total
    cdf_ge = dist[int(math.ceil(u)):].sum() / total
    return _clip_p(2.0 * min(cdf_le, cdf_ge))


def mann_whitney_normal_p(u: float, n1: int, n2: int, tie_sizes: np.ndarray | None = None) -> float:
    n = n1 + n2
    mu = n1 * n2 / 2.0
    tie_term = 0.0 if tie_sizes is None or tie_sizes.size == 0 else float(((tie_sizes ** 3) - tie_sizes).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        return 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return _clip_p(2.0 * NormalDist().cdf(-z))


def mann_whitney_u(a: Sequence[float], b: Sequence[float], alpha: float = DEFAULT_ALPHA,
                   method: str = "auto") -> TestResult:
    """Two-sided Mann-Whitney U test.

    The reported statistic is ``n1*n2 + n1*(n1+1)/2 - R1`` (pairs won by ``b``,
    half-counting ties). ``min(U1, U2)`` and ``U1`` are in ``diagnostics``.

    method : "auto" uses exact enumeration when n1+n2 <= 12 and there are no
        ties, otherwise the tie-corrected normal approximation with continuity
        correction. "exact" and "asymptotic" force one route.
    """
    x, y = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if x.size == 0 or y.size == 0:
        raise DomainError("Mann-Whitney U needs two non-empty samples")
    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = rankdata(pooled)
    r1 = ranks[:n1].sum()
    u_paper = n1 * n2 + n1 * (n1 + 1) / 2.0 - r1
    u1 = n1 * n2 - u_paper
    ties = _tie_sizes(pooled)
    if method == "auto":
        method = "exact" if (n1 + n2 <= EXACT_MWU_MAX_N and ties.size == 0) else "asymptotic"
    if method == "exact":
        if ties.size:
            raise DomainError("exact Mann-Whitney p-value requires untied samples")
        p = mann_whitney_exact_sf(u_paper, n1, n2)
    elif method == "asymptotic":
        p = mann_whitney_normal_p(u_paper, n1, n2, ties)
    else:
        raise DomainError(f"unknown method {method!r}")
    diag = {"u1": float(u1), "u_min": float(min(u1, u_paper)), "rank_sum_a": float(r1),
            "n1": n1, "n2": n2, "p_method": method}
    return TestResult(float(u_paper), p, "mann_whitney", alpha, None, diag)


# -- correlation ---------------------------------------------------------------

def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if xa.size != ya.size or xa.size < 2:
        raise DomainError("pearson_r needs two equal-length samples of size >= 2")
    dx, dy = xa - xa.mean(), ya - ya.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DomainError("correlation is undefined for a zero-variance sample")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def correlation_matrix(rows: np.ndarray, column_names: Sequence[str],
                       columns: Sequence[str] | None = None) -> CorrelationMatrix:
    rows = np.asarray(rows, dtype=float)
    names = list(column_names)
    wanted = list(columns) if columns is not None else names
    keep, excluded = [], []
    for c in wanted:
        col = rows[:, names.index(c)]
        (keep if col.size >= 2 and np.ptp(col) > 0 else excluded).append(c)
    d = len(keep)
    r = np.eye(d)
    for i, j in combinations(range(d), 2):
        r[i, j] = r[j, i] = pearson_r(rows[:, names.index(keep[i])], rows[:, names.index(keep[j])])
    return CorrelationMatrix(keep, r, excluded)


# -- EDA aggregations ------------------------------------------------------

def monthly_counts(incidents) -> dict[int, int]:
    counts = {m: 0 for m in [-1, *range(1, 13)]}
    for inc in incidents:
        counts[inc.base.incident_month] += 1
    return counts


def holiday_comparison(incidents, alpha: float = DEFAULT_ALPHA) -> dict:
    known = [i for i in incidents if i.base.incident_month != -1]
    hol = [float(i.threat_enrichment_score) for i in known if i.is_holiday_month]
    non = [float(i.threat_enrichment_score) for i in known if not i.is_holiday_month]
    for name, grp in (("holiday", hol), ("non_holiday", non)):
        if not grp:
            raise DomainError(f"{name} group is empty")
    return {
        "mean_holiday": float(np.mean(hol)),
        "mean_non_holiday": float(np.mean(non)),
        "n_holiday": len(hol),
        "n_non_holiday": len(non),
        "test": mann_whitney_u(hol, non, alpha),
    }


def categorical_distribution(incidents, field: str) -> dict[str, tuple[int, float]]:
    """Count and percentage per observed label; labels never seen are absent."""
    counts = Counter()
    for inc in incidents:
        v = inc.get(field)
        counts["Unknown" if v is None else str(v)] += 1
    total = sum(counts.values())
    return {k: (c, 100.0 * c / total) for k, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))}


def season_groups(incidents, value: str = "threat_enrichment_score") -> dict[str, list[float]]:
    """Values per known season, in calendar order, skipping empty seasons."""
    out = {}
    for season in ("Winter", "Spring", "Summer", "Autumn"):
        vals = [float(i.get(value)) for i in incidents if i.season == season]
        if vals:
            out[season] = vals
    return out
