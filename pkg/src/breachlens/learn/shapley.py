"""Interventional Shapley attribution for any model with a ``raw_score`` method.

The value of a coalition S is the mean model output over background rows
with the features in S replaced by those of the explained row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import DomainError
from ..resample import make_rng

EXACT_MAX_FEATURES = 16
_CHUNK_ROWS = 262_144


@dataclass
class Attribution:
    values: np.ndarray
    baseline: float
    prediction: float


def _output_fn(model, output: str) -> Callable[[np.ndarray], np.ndarray]:
    if callable(model) and not hasattr(model, "raw_score"):
        return model
    if output == "raw":
        return model.raw_score
    if output == "probability":
        return model.predict_proba
    raise DomainError(f"unknown output {output!r}")


def coalition_values(f, x: np.ndarray, background: np.ndarray) -> np.ndarray:
    """v(S) for every subset S of features, indexed by bitmask."""
    b, d = background.shape
    n_masks = 1 << d
    bits = (np.arange(n_masks)[:, None] >> np.arange(d)[None, :]) & 1
    values = np.empty(n_masks)
    per_chunk = max(1, _CHUNK_ROWS // b)
    for start in range(0, n_masks, per_chunk):
        m = bits[start:start + per_chunk].astype(bool)
        hybrid = np.where(m[:, None, :], x[None, None, :], background[None, :, :])
        out = f(hybrid.reshape(-1, d)).reshape(len(m), b)
        values[start:start + len(m)] = out.mean(axis=1)
    return values


def _exact(f, x, background) -> np.ndarray:
    d = x.size
    v = coalition_values(f, x, background)
    masks = np.arange(1 << d)
    sizes = np.array([bin(m).count("1") for m in masks])
    weight = np.array([math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d) if s < d else 0.0
                       for s in range(d + 1)])
    phi = np.empty(d)
    for i in range(d):
        without = masks[(masks >> i) & 1 == 0]
        phi[i] = float(np.sum(weight[sizes[without]] * (v[without | (1 << i)] - v[without])))
    return phi


def _sampled(f, x, background, n_permutations, seed) -> np.ndarray:
    b, d = background.shape
    rng = make_rng(seed)
    perms = [rng.permutation(d) for _ in range(n_permutations)]
    phi = np.zeros(d)
    per_chunk = max(1, _CHUNK_ROWS // ((d + 1) * b))
    for start in range(0, n_permutations, per_chunk):
        chunk = perms[start:start + per_chunk]
        stages = np.repeat(background[None, None, :, :], len(chunk), axis=0)
        stages = np.repeat(stages, d + 1, axis=1)
        for c, perm in enumerate(chunk):
            for step, feat in enumerate(perm, start=1):
                stages[c, step:, :, feat] = x[feat]
        v = f(stages.reshape(-1, d)).reshape(len(chunk), d + 1, b).mean(axis=2)
        for c, perm in enumerate(chunk):
            phi[perm] += np.diff(v[c])
    return phi / n_permutations


def shapley_attribution(model, x, background, mode: str = "exact", output: str = "raw",
                        n_permutations: int = 64, seed: int = 0) -> Attribution:
    f = _output_fn(model, output)
    x = np.asarray(x, dtype=float).ravel()
    background = np.asarray(background, dtype=float)
    if background.ndim != 2 or background.shape[0] == 0:
        raise DomainError("background must be a non-empty matrix")
    if background.shape[1] != x.size:
        raise DomainError("background and x disagree on the feature count")
    if mode == "exact":
        if x.size > EXACT_MAX_FEATURES:
            raise DomainError(f"exact mode supports at most {EXACT_MAX_FEATURES} features; "
                              f"use mode='sampled' for {x.size}")
        phi = _exact(f, x, background)
    elif mode == "sampled":
        phi = _sampled(f, x, background, n_permutations, seed)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    baseline = float(f(background).mean())
    return Attribution(phi, baseline, float(f(x[None, :])[0]))


def global_importance(model, X_eval, background, feature_names: Sequence[str] | None = None,
                      mode: str = "exact", output: str = "raw", n_permutations: int = 64,
                      seed: int = 0) -> list[tuple[str, float]]:
    """Mean |Shapley value| per feature, largest first; ties keep column order."""
    X_eval = np.asarray(X_eval, dtype=float)
    d = X_eval.shape[1]
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(d)]
    total = np.zeros(d)
    for row in X_eval:
        total += np.abs(shapley_attribution(model, row, background, mode, output, n_permutations, seed).values)
    mean_abs = total / max(len(X_eval), 1)
    order = sorted(range(d), key=lambda i: (-mean_abs[i], i))
    return [(names[i], float(mean_abs[i])) for i in order]


def background_sample(X, size: int = 64, seed: int = 0) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if len(X) <= size:
        return X.copy()
    idx = np.sort(make_rng(seed).choice(len(X), size=size, replace=False))
    return X[idx]
