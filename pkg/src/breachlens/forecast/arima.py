"""ARIMA(p, d, q) estimation by exact Gaussian likelihood, stepwise order search
and forecasting with psi-weight intervals.

The likelihood of the differenced series uses the exact ARMA autocovariance
and the innovations (Cholesky, ``Gamma = L D L'``) factorisation of its
Toeplitz covariance. The innovation variance and the mean are concentrated
out; only the ARMA coefficients are optimised, through a partial-
autocorrelation reparameterisation that keeps the AR polynomial stationary
and the MA polynomial invertible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np
from scipy import linalg, optimize, signal

from ..errors import ConvergenceError, DegenerateFitError, DomainError
from .kpss import KPSS_MIN_LENGTH, kpss_stationarity

MAX_ITER = 500
_PACF_CLIP = 0.995
STEPWISE_TOL = 1e-6
# candidates with a root this close to the unit circle are inadmissible
ADMISSIBLE_ROOT_MODULUS = 1.01


@dataclass
class ArimaFit:
    order: tuple[int, int, int]
    include_intercept: bool
    ar_coeffs: list[float]
    ma_coeffs: list[float]
    intercept: float
    sigma2: float
    loglik: float
    aic: float
    n_obs: int
    aicc: float = math.nan
    data: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "include_intercept": self.include_intercept,
            "ar_coeffs": list(self.ar_coeffs),
            "ma_coeffs": list(self.ma_coeffs),
            "intercept": self.intercept,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aic": self.aic,
            "aicc": self.aicc,
            "n_obs": self.n_obs,
        }

    @property
    def n_params(self) -> int:
        p, _, q = self.order
        return p + q + int(self.include_intercept) + 1


# -- parameter transforms ---------------------------------------------------

def pacf_to_coeffs(r) -> np.ndarray:
    """Map partial autocorrelations in (-1, 1) to stationary AR coefficients."""
    phi = np.zeros(0)
    for k, rk in enumerate(r):
        phi = np.append(phi - rk * phi[::-1], rk) if k else np.array([rk])
    return phi


def coeffs_to_pacf(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float).copy()
    p = phi.size
    r = np.zeros(p)
    for k in range(p, 0, -1):
        rk = phi[k - 1]
        r[k - 1] = rk
        if abs(rk) >= 1:
            raise DomainError("coefficients are not stationary")
        phi = (phi[: k - 1] + rk * phi[: k - 1][::-1]) / (1.0 - rk * rk)
    return r


def _unpack(u, p, q) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    phi = pacf_to_coeffs(np.tanh(u[:p])) if p else np.zeros(0)
    theta = -pacf_to_coeffs(np.tanh(u[p:p + q])) if q else np.zeros(0)
    return phi, theta


def _pack(phi, theta) -> np.ndarray:
    parts = []
    for coeffs, sign in ((phi, 1.0), (theta, -1.0)):
        if len(coeffs):
            try:
                r = coeffs_to_pacf(sign * np.asarray(coeffs))
            except DomainError:
                r = np.zeros(len(coeffs))
            parts.append(np.arctanh(np.clip(r, -_PACF_CLIP, _PACF_CLIP)))
    return np.concatenate(parts) if parts else np.zeros(0)


def polynomial_roots_modulus(coeffs, sign: float) -> np.ndarray:
    """Moduli of the roots of ``1 + sign * sum(c_j z^j)``."""
    if len(coeffs) == 0:
        return np.zeros(0)
    poly = np.concatenate([[1.0], sign * np.asarray(coeffs, dtype=float)])
    return np.abs(np.roots(poly[::-1]))


# -- autocovariance and likelihood --------------------------------------------

def arma_acovf(phi, theta, nobs: int) -> np.ndarray:
    """Autocovariances 0..nobs-1 of an ARMA process with unit innovation variance."""
    phi = np.asarray(phi, dtype=float)
    theta = np.concatenate([[1.0], np.asarray(theta, dtype=float)])
    p, q = phi.size, theta.size - 1
    psi = np.zeros(q + 1)
    psi[0] = 1.0
    for j in range(1, q + 1):
        psi[j] = theta[j] + sum(phi[i - 1] * psi[j - i] for i in range(1, min(j, p) + 1))
    c = np.array([sum(theta[j] * psi[j - k] for j in range(k, q + 1)) for k in range(q + 1)])
    m = max(nobs, p + 1, q + 1)
    gamma = np.zeros(m)
    if p == 0:
        gamma[: q + 1] = c
        return gamma[:nobs]
    A = np.eye(p + 1)
    rhs = np.zeros(p + 1)
    for k in range(p + 1):
        for i in range(1, p + 1):
            A[k, abs(k - i)] -= phi[i - 1]
        rhs[k] = c[k] if k <= q else 0.0
    gamma[: p + 1] = np.linalg.solve(A, rhs)
    for k in range(p + 1, m):
        gamma[k] = phi @ gamma[k - p:k][::-1] + (c[k] if k <= q else 0.0)
    return gamma[:nobs]


def _concentrated(w: np.ndarray, phi, theta, intercept: bool):
    """Exact loglik with sigma^2 and the mean profiled out.

    Returns (loglik, mu, sigma2) or None when the covariance is not positive definite.
    """
    n = w.size
    try:
        gamma = arma_acovf(phi, theta, n)
        chol = linalg.cho_factor(linalg.toeplitz(gamma), lower=True, check_finite=False)
    except (linalg.LinAlgError, np.linalg.LinAlgError):
        return None
    diag = np.diag(chol[0])
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        return None
    logdet = 2.0 * float(np.log(diag).sum())
    if intercept:
        ones = np.ones(n)
        r_ones = linalg.cho_solve(chol, ones, check_finite=False)
        mu = float(r_ones @ w) / float(r_ones @ ones)
    else:
        mu = 0.0
    z = w - mu
    quad = float(z @ linalg.cho_solve(chol, z, check_finite=False))
    sigma2 = quad / n
    if not np.isfinite(sigma2) or sigma2 <= 0:
        return None
    loglik = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0) - 0.5 * logdet
    return loglik, mu, sigma2


def css_residuals(w: np.ndarray, mu: float, phi, theta) -> np.ndarray:
    ar = np.concatenate([[1.0], -np.asarray(phi, dtype=float)])
    ma = np.concatenate([[1.0], np.asarray(theta, dtype=float)])
    return signal.lfilter(ar, ma, w - mu)


def _difference(y: np.ndarray, d: int) -> np.ndarray:
    return np.diff(y, n=d) if d else y.copy()


def _minimize(fun, x0, maxiter=MAX_ITER):
    res = optimize.minimize(fun, x0, method="L-BFGS-B", options={"maxiter": maxiter})
    if not res.success and res.nit >= maxiter:
        alt = optimize.minimize(fun, res.x, method="Nelder-Mead",
                                options={"maxiter": maxiter * 4, "xatol": 1e-8, "fatol": 1e-10})
        if alt.fun <= res.fun:
            res = alt
        if not alt.success:
            raise ConvergenceError("likelihood optimisation did not converge",
                                   {"best_x": res.x.tolist(), "best_objective": float(res.fun),
                                    "message": str(alt.message)})
    return res


def fit_arima(series, order: tuple[int, int, int], include_intercept: bool = True) -> ArimaFit:
    p, d, q = (int(v) for v in order)
    if min(p, d, q) < 0:
        raise DomainError("orders must be non-negative")
    y = np.asarray(series, dtype=float)
    k = p + q + int(include_intercept) + 1
    if y.size - d <= k:
        raise DomainError(f"ARIMA{(p, d, q)} needs more than {k} observations after differencing")
    w = _difference(y, d)
    n = w.size
    scale = max(float(np.abs(w).max()), 1.0)
    if np.ptp(w) <= 1e-12 * scale and (include_intercept or np.all(w == 0)):
        raise DegenerateFitError("series is constant after differencing; innovation variance is zero")

    if p == 0 and q == 0:
        mu = float(w.mean()) if include_intercept else 0.0
        sigma2 = float(np.mean((w - mu) ** 2))
        if sigma2 <= 0:
            raise DegenerateFitError("innovation variance is zero")
        loglik = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
        return _finish((p, d, q), include_intercept, [], [], mu, sigma2, loglik, n, y)

    mean0 = float(w.mean()) if include_intercept else 0.0

    def css(u):
        phi, theta = _unpack(u, p, q)
        e = css_residuals(w, mean0, phi, theta)[p:]
        return 0.5 * float(e @ e)

    def negll(u):
        phi, theta = _unpack(u, p, q)
        out = _concentrated(w, phi, theta, include_intercept)
        return 1e12 if out is None else -out[0]

    start = _minimize(css, np.zeros(p + q)).x
    start_obj = negll(start)
    res = _minimize(negll, start)
    u = res.x if res.fun <= start_obj else start
    phi, theta = _unpack(u, p, q)
    out = _concentrated(w, phi, theta, include_intercept)
    if out is None:
        raise ConvergenceError("no admissible parameters found", {"best_x": u.tolist()})
    loglik, mu, sigma2 = out
    if sigma2 <= 1e-14 * scale * scale:
        raise DegenerateFitError("innovation variance collapsed to zero")
    return _finish((p, d, q), include_intercept, phi.tolist(), theta.tolist(), mu, sigma2, loglik, n, y)


def _finish(order, intercept, phi, theta, mu, sigma2, loglik, n, y) -> ArimaFit:
    k = order[0] + order[2] + int(intercept) + 1
    aic = -2.0 * loglik + 2.0 * k
    aicc = aic + 2.0 * k * (k + 1) / (n - k - 1) if n - k - 1 > 0 else math.inf
    return ArimaFit(tuple(order), intercept, list(phi), list(theta), float(mu), float(sigma2),
                    float(loglik), float(aic), int(n), float(aicc), [float(v) for v in y])


# -- order selection ------------------------------------------------------

def ndiffs_kpss(series, max_d: int = 2) -> int:
    y = np.asarray(series, dtype=float)
    d = 0
    while d < max_d:
        w = _difference(y, d)
        if w.size < KPSS_MIN_LENGTH or not kpss_stationarity(w)["reject_at_5pct"]:
            break
        d += 1
    return d


@dataclass
class AutoArimaResult:
    best: ArimaFit
    d: int
    visited: list[dict]
    failures: list[dict]


def _admissible(fit: ArimaFit) -> bool:
    roots = np.concatenate([polynomial_roots_modulus(fit.ar_coeffs, -1.0),
                            polynomial_roots_modulus(fit.ma_coeffs, 1.0)])
    return bool(np.all(roots >= ADMISSIBLE_ROOT_MODULUS))


def auto_arima(series, max_p: int = 3, max_q: int = 3, max_d: int = 2,
               criterion: str = "aic", return_trace: bool = False):
    """Stepwise AIC search over (p, q) and the intercept, with d chosen by KPSS.

    Starts from (2,d,2), (0,d,0), (1,d,0), (0,d,1); each step tries p-1, p+1,
    q-1, q+1 and then the intercept toggle, moving on the first strict
    improvement. Intercepts are only considered for d <= 1. Fits with an AR
    or MA root inside modulus 1.01 count as failed candidates.
    """
    if criterion not in ("aic", "aicc"):
        raise DomainError("criterion must be 'aic' or 'aicc'")
    y = np.asarray(series, dtype=float)
    d = ndiffs_kpss(y, max_d)
    allow_intercept = d <= 1
    cache: dict[tuple[int, int, bool], ArimaFit | None] = {}
    visited, failures = [], []

    def score(key):
        if key not in cache:
            p, q, c = key
            try:
                fit = fit_arima(y, (p, d, q), c)
                if not _admissible(fit):
                    raise DomainError("root within 1.01 of the unit circle")
                visited.append({"order": [p, d, q], "intercept": c, criterion: getattr(fit, criterion)})
            except (DomainError, ConvergenceError, DegenerateFitError) as exc:
                fit = None
                failures.append({"order": [p, d, q], "intercept": c, "error": str(exc)})
            cache[key] = fit
        fit = cache[key]
        return math.inf if fit is None else getattr(fit, criterion)

    current, current_score = None, math.inf
    for p, q in ((2, 2), (0, 0), (1, 0), (0, 1)):
        key = (min(p, max_p), min(q, max_q), allow_intercept)
        s = score(key)
        if s < current_score - STEPWISE_TOL or current is None and math.isfinite(s):
            current, current_score = key, s
    if current is None:
        raise ConvergenceError("every candidate ARIMA order failed", {"failures": failures})

    improved = True
    while improved:
        improved = False
        p, q, c = current
        neighbours = [(p - 1, q, c), (p + 1, q, c), (p, q - 1, c), (p, q + 1, c)]
        if allow_intercept:
            neighbours.append((p, q, not c))
        for key in neighbours:
            if not (0 <= key[0] <= max_p and 0 <= key[1] <= max_q):
                continue
            s = score(key)
            if s < current_score - STEPWISE_TOL:
                current, current_score = key, s
                improved = True
                break
    best = cache[current]
    if return_trace:
        return AutoArimaResult(best, d, visited, failures)
    return best


# -- forecasting ------------------------------------------------------------

@dataclass
class ForecastResult:
    horizon_labels: list
    point: list[float]
    lower: list[float]
    upper: list[float]
    level: float
    model_tag: str

    def rows(self) -> list[dict]:
        return [{"label": lab, "point": p, "lower": lo, "upper": up}
                for lab, p, lo, up in zip(self.horizon_labels, self.point, self.lower, self.upper)]

    def to_dict(self) -> dict:
        return {"horizon_labels": list(self.horizon_labels), "point": list(self.point),
                "lower": list(self.lower), "upper": list(self.upper), "level": self.level,
                "model_tag": self.model_tag}


def psi_weights(phi, theta, d: int, h: int) -> np.ndarray:
    ar = np.concatenate([[1.0], -np.asarray(phi, dtype=float)])
    for _ in range(d):
        ar = np.convolve(ar, [1.0, -1.0])
    full_phi = -ar[1:]
    theta = np.asarray(theta, dtype=float)
    psi = np.zeros(h)
    psi[0] = 1.0
    for j in range(1, h):
        acc = theta[j - 1] if j <= theta.size else 0.0
        for i in range(1, min(j, full_phi.size) + 1):
            acc += full_phi[i - 1] * psi[j - i]
        psi[j] = acc
    return psi


def forecast_arima(fit: ArimaFit, h: int, level: float = 0.95, labels=None) -> ForecastResult:
    if h < 1:
        raise DomainError("horizon must be at least 1")
    p, d, q = fit.order
    y = np.asarray(fit.data, dtype=float)
    w = _difference(y, d)
    mu = fit.intercept
    phi = np.asarray(fit.ar_coeffs)
    theta = np.asarray(fit.ma_coeffs)
    hist = list(w - mu)
    resid = list(css_residuals(w, mu, phi, theta)) if q else []
    for _ in range(h):
        val = sum(phi[i] * hist[-1 - i] for i in range(p))
        val += sum(theta[j] * resid[-1 - j] for j in range(q))
        hist.append(val)
        if q:
            resid.append(0.0)
    wf = np.asarray(hist[-h:]) + mu
    # integrate back through each differencing level
    for level_d in range(d, 0, -1):
        last = _difference(y, level_d - 1)[-1]
        wf = last + np.cumsum(wf)
    psi = psi_weights(phi, theta, d, h)
    sd = np.sqrt(fit.sigma2 * np.cumsum(psi ** 2))
    z = NormalDist().inv_cdf((1.0 + level) / 2.0)
    point = wf.tolist()
    labels = list(labels) if labels is not None else list(range(1, h + 1))
    tag = f"ARIMA({p},{d},{q}){'+intercept' if fit.include_intercept else ''}"
    return ForecastResult(labels, point, (wf - z * sd).tolist(), (wf + z * sd).tolist(), level, tag)
