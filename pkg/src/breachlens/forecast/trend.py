"""Piecewise-linear changepoint trend with L1-penalised slope changes.

    g(t) = a + b t + sum_j delta_j (t - s_j)_+

The intercept and base slope are unpenalised. For fixed deltas they have a
closed form, so the solver works on the deltas alone after projecting the
design onto the complement of span{1, t}, and runs monotone FISTA on

    1/2 ||P (y - H delta)||^2 + lambda ||delta||_1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, DomainError
from ..resample import make_rng
from .arima import ForecastResult

TREND_MIN_LENGTH = 4
MAX_CHANGEPOINTS = 19
CHANGEPOINT_RANGE = 0.8
TOL = 1e-10
MAX_ITER = 200_000
POLISH_EVERY = 500
# Laplace prior scale on slope changes used to derive the default penalty
PRIOR_SCALE = 0.05


@dataclass
class TrendModel:
    changepoints: list[float]
    base_intercept: float
    base_slope: float
    slope_deltas: list[float]
    l1_penalty: float
    residual_sd: float
    n_obs: int = 0
    seed: int = 0
    iterations: int = 0
    objective_trace: list[float] = field(default_factory=list, repr=False)

    def trend(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = self.base_intercept + self.base_slope * t
        for s, dlt in zip(self.changepoints, self.slope_deltas):
            out = out + dlt * np.maximum(t - s, 0.0)
        return out

    def final_slope(self) -> float:
        return self.base_slope + float(sum(self.slope_deltas))

    def to_dict(self) -> dict:
        return {"changepoints": list(self.changepoints), "base_intercept": self.base_intercept,
                "base_slope": self.base_slope, "slope_deltas": list(self.slope_deltas),
                "l1_penalty": self.l1_penalty, "residual_sd": self.residual_sd,
                "n_obs": self.n_obs, "seed": self.seed, "iterations": self.iterations,
                "final_objective": self.objective_trace[-1] if self.objective_trace else None}

    @classmethod
    def from_dict(cls, d: dict) -> "TrendModel":
        return cls([float(s) for s in d["changepoints"]], float(d["base_intercept"]),
                   float(d["base_slope"]), [float(x) for x in d["slope_deltas"]],
                   float(d["l1_penalty"]), float(d["residual_sd"]), int(d.get("n_obs", 0)),
                   int(d.get("seed", 0)), int(d.get("iterations", 0)))


def changepoint_grid(n: int, n_changepoints: int) -> np.ndarray:
    """S changepoints evenly spaced over (0, 0.8 (n - 1)]."""
    if n_changepoints <= 0:
        return np.zeros(0)
    j = np.arange(1, n_changepoints + 1)
    return CHANGEPOINT_RANGE * (n - 1) * j / n_changepoints


def hinge_basis(t: np.ndarray, changepoints: np.ndarray) -> np.ndarray:
    return np.maximum(t[:, None] - changepoints[None, :], 0.0)


def default_penalty(y: np.ndarray) -> float:
    """Penalty matching a Laplace(0, 0.05) prior on slope changes in
    max-scaled units, with the noise level from a straight-line fit."""
    n = y.size
    t = np.arange(n, dtype=float)
    A = np.column_stack([np.ones(n), t])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    s2 = float(resid @ resid) / max(n - 2, 1)
    ymax = float(np.max(np.abs(y)))
    return s2 * (n - 1) / ((ymax if ymax > 0 else 1.0) * PRIOR_SCALE)


def _soft(x, thr):
    return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)


def _polish(Hp, yp, lam, x, fx, objective):
    """Solve the optimality conditions on the support FISTA found.

    With the signs fixed the problem is a linear least-squares system, which
    removes the slow tail along ill-conditioned hinge directions. The result
    is returned only if it is a valid optimum (signs agree, inactive
    gradients within lambda); otherwise ``x`` comes back unchanged.
    """
    active = np.ones(x.size, dtype=bool) if lam == 0 else x != 0
    if not active.any():
        return x, fx
    HA = Hp[:, active]
    s = np.sign(x[active])
    rhs = HA.T @ yp - lam * s
    sol, *_ = np.linalg.lstsq(HA.T @ HA, rhs, rcond=None)
    if lam > 0 and np.any(np.sign(sol) != s):
        return x, fx
    cand = np.zeros_like(x)
    cand[active] = sol
    if lam > 0 and (~active).any():
        grad = Hp[:, ~active].T @ (yp - Hp @ cand)
        if np.any(np.abs(grad) > lam * (1.0 + 1e-9)):
            return x, fx
    return cand, objective(cand)


def _mfista(Hp, yp, lam, tol=TOL, max_iter=MAX_ITER):
    """Monotone FISTA with adaptive restart; returns (delta, objective trace, iterations)."""
    k = Hp.shape[1]
    x = np.zeros(k)
    if k == 0:
        r = yp
        return x, [0.5 * float(r @ r)], 0
    L = float(np.linalg.eigvalsh(Hp.T @ Hp)[-1])
    if L <= 0:
        r = yp
        return x, [0.5 * float(r @ r)], 0

    def objective(v):
        r = yp - Hp @ v
        return 0.5 * float(r @ r) + lam * float(np.abs(v).sum())

    fx = objective(x)
    trace = [fx]
    w, tk = x.copy(), 1.0
    for it in range(1, max_iter + 1):
        w_prev = w
        z = _soft(w - Hp.T @ (Hp @ w - yp) / L, lam / L)
        fz = objective(z)
        x_new, f_new = (z, fz) if fz <= fx else (x, fx)
        if fz > fx or float((w - z) @ (z - x)) > 0.0:
            # momentum points uphill: restart from the current iterate
            tk, w = 1.0, x_new.copy()
        else:
            t_next = (1.0 + math.sqrt(1.0 + 4.0 * tk * tk)) / 2.0
            w = x_new + (tk / t_next) * (z - x_new) + ((tk - 1.0) / t_next) * (x_new - x)
            tk = t_next
        # size of the proximal-gradient step from w, zero exactly at the optimum
        step = float(np.max(np.abs(z - w_prev)))
        x, fx = x_new, f_new
        trace.append(fx)
        if step <= tol or it % POLISH_EVERY == 0:
            cand, fc = _polish(Hp, yp, lam, x, fx, objective)
            # accept a polished point only if it passes the same stopping test
            z_c = _soft(cand - Hp.T @ (Hp @ cand - yp) / L, lam / L)
            # equal objectives may differ in the last bits, hence the slack
            if fc <= fx + 1e-12 * abs(fx) and float(np.max(np.abs(z_c - cand))) <= tol:
                if fc < fx:
                    trace.append(fc)
                return cand, trace, it
            if step <= tol:
                return x, trace, it
    raise ConvergenceError("trend solver did not reach tolerance",
                           {"iterations": max_iter, "objective": fx, "last_step": step})


def fit_trend_model(series, n_changepoints: int | None = None, l1_penalty: float | None = None,
                    seed: int = 0) -> TrendModel:
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < TREND_MIN_LENGTH:
        raise DomainError(f"trend model needs at least {TREND_MIN_LENGTH} observations, got {n}")
    if not np.all(np.isfinite(y)):
        raise DomainError("series must be finite")
    if n_changepoints is None:
        n_changepoints = min(MAX_CHANGEPOINTS, n - 3)
    if n_changepoints < 0:
        raise DomainError("n_changepoints must be non-negative")
    lam = default_penalty(y) if l1_penalty is None else float(l1_penalty)
    if lam < 0:
        raise DomainError("l1_penalty must be non-negative")
    cps = changepoint_grid(n, n_changepoints)
    if np.ptp(y) == 0:
        # flat data: the exact optimum, free of rounding noise
        return TrendModel([float(c) for c in cps], float(y[0]), 0.0, [0.0] * cps.size, lam, 0.0,
                          n, seed, 0, [0.0])

    t = np.arange(n, dtype=float)
    H = hinge_basis(t, cps)
    A = np.column_stack([np.ones(n), t])
    Q, _ = np.linalg.qr(A)

    def project(M):
        return M - Q @ (Q.T @ M)

    delta, trace, iters = _mfista(project(H), project(y), lam)
    # unpenalised intercept and slope given the deltas
    coef, *_ = np.linalg.lstsq(A, y - H @ delta, rcond=None)
    resid = y - A @ coef - H @ delta
    return TrendModel([float(s) for s in cps], float(coef[0]), float(coef[1]),
                      [float(v) for v in delta], lam, float(math.sqrt(float(resid @ resid) / n)),
                      n, seed, iters, trace)


def forecast_trend(model: TrendModel, series, h: int, level: float = 0.80, n_boot: int = 500,
                   seed: int | None = None, labels=None) -> ForecastResult:
    """Extend the last trend segment; intervals by simulation.

    Each draw adds future slope changes (per-step probability S/n, Laplace
    magnitudes with scale mean |delta|) and bootstrapped fit residuals.
    """
    if h < 1:
        raise DomainError("horizon must be at least 1")
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    y = np.asarray(series, dtype=float)
    n = y.size
    t_past = np.arange(n, dtype=float)
    resid = y - model.trend(t_past)
    steps = np.arange(1, h + 1, dtype=float)
    point = model.trend(n - 1 + steps)

    rng = make_rng(model.seed if seed is None else seed)
    rate = len(model.changepoints) / n
    scale = float(np.mean(np.abs(model.slope_deltas))) if model.slope_deltas else 0.0
    occurs = rng.random((n_boot, h)) < rate
    sizes = rng.laplace(0.0, 1.0, (n_boot, h)) * scale
    changes = np.where(occurs, sizes, 0.0)
    # a slope change at step j shifts step k >= j by change * (k - j)
    lag = np.maximum(steps[None, :] - steps[:, None], 0.0)
    trend_shift = changes @ lag
    noise = rng.choice(resid, size=(n_boot, h), replace=True)
    paths = point[None, :] + trend_shift + noise

    lo = np.quantile(paths, (1.0 - level) / 2.0, axis=0)
    hi = np.quantile(paths, (1.0 + level) / 2.0, axis=0)
    lower = np.minimum(lo, point)
    upper = np.maximum(hi, point)
    labels = list(labels) if labels is not None else list(range(1, h + 1))
    return ForecastResult(labels, [float(v) for v in point], [float(v) for v in lower],
                          [float(v) for v in upper], level, "trend")
