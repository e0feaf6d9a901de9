"""Independent reference implementations used only by the tests.

Each oracle takes a different route from the package code: high-precision
special functions, exhaustive enumeration or direct O(n^2) pair counting.
"""
from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np

mpmath.mp.dps = 50


def f_sf(f, d1, d2) -> float:
    """Upper tail of the F distribution via the regularised incomplete beta."""
    x = mpmath.mpf(d2) / (mpmath.mpf(d2) + mpmath.mpf(d1) * mpmath.mpf(f))
    return float(mpmath.betainc(mpmath.mpf(d2) / 2, mpmath.mpf(d1) / 2, 0, x, regularized=True))


def chi2_sf(x, k) -> float:
    return float(mpmath.gammainc(mpmath.mpf(k) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))


def average_ranks(values) -> list[float]:
    """Ranks by counting: 1 + #smaller + (#equal - 1) / 2."""
    return [1 + sum(w < v for w in values) + (sum(w == v for w in values) - 1) / 2 for v in values]


def kruskal_h(groups) -> float:
    pooled = [v for g in groups for v in g]
    n = len(pooled)
    r = average_ranks(pooled)
    h, i = 0.0, 0
    for g in groups:
        h += sum(r[i:i + len(g)]) ** 2 / len(g)
        i += len(g)
    h = 12 / (n * (n + 1)) * h - 3 * (n + 1)
    ties = [pooled.count(v) for v in set(pooled)]
    return h / (1 - sum(t ** 3 - t for t in ties) / (n ** 3 - n))


def mann_whitney_exact_p(a, b) -> float:
    """Two-sided exact p for untied samples by listing every rank subset."""
    n1, n2 = len(a), len(b)
    n = n1 + n2
    r1 = sum(average_ranks(list(a) + list(b))[:n1])
    u_obs = n1 * n2 + n1 * (n1 + 1) / 2 - r1
    us = [n1 * n2 + n1 * (n1 + 1) / 2 - sum(c) for c in itertools.combinations(range(1, n + 1), n1)]
    total = len(us)
    le = sum(u <= u_obs for u in us) / total
    ge = sum(u >= u_obs for u in us) / total
    return min(1.0, 2 * min(le, ge))


def pairwise_auc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    won = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return won / (len(pos) * len(neg))


def permutation_shapley(f, x, background) -> np.ndarray:
    """Shapley values by averaging marginal contributions over all d! orders."""
    x = np.asarray(x, dtype=float)
    bg = np.asarray(background, dtype=float)
    d = x.size

    def v(members):
        z = bg.copy()
        for j in members:
            z[:, j] = x[j]
        return float(np.mean(f(z)))

    phi = np.zeros(d)
    perms = list(itertools.permutations(range(d)))
    for perm in perms:
        seen = []
        prev = v(seen)
        for j in perm:
            seen.append(j)
            cur = v(seen)
            phi[j] += cur - prev
            prev = cur
    return phi / len(perms)


def pooled_t(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    n1, n2 = a.size, b.size
    sp2 = (((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()) / (n1 + n2 - 2)
    return float((a.mean() - b.mean()) / math.sqrt(sp2 * (1 / n1 + 1 / n2)))


def on_segment(point, originals, tol=1e-9) -> bool:
    """True when ``point`` lies on a segment between two rows of ``originals``."""
    for i, j in itertools.product(range(len(originals)), repeat=2):
        a, b = originals[i], originals[j]
        d = b - a
        dd = float(d @ d)
        t = 0.0 if dd == 0 else float(np.clip((point - a) @ d / dd, 0.0, 1.0))
        if np.all(np.abs(point - (a + t * d)) < tol):
            return True
    return False
