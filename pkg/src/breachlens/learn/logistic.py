"""L2-regularised logistic regression trained by full-batch gradient descent."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, DomainError


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    training_trace: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    kind = "logistic"

    @property
    def n_features(self) -> int:
        return int(self.weights.size)

    def raw_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DomainError(f"expected {self.n_features} features, got shape {X.shape}")
        return X @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.raw_score(X))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist(), "bias": self.bias,
                "training_trace": list(self.training_trace), "config": dict(self.config)}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(np.asarray(d["weights"], dtype=float), float(d["bias"]),
                   list(d.get("training_trace", [])), dict(d.get("config", {})))


def objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean log loss plus ``l2/2 * ||w||^2``; returns (loss, grad_w, grad_b)."""
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    r = sigmoid(z) - y
    return loss, X.T @ r / len(y) + l2 * w, float(r.mean())


def lipschitz_step(X: np.ndarray, l2: float) -> float:
    """Step ``1/L`` where L bounds the curvature of the objective."""
    Xb = np.column_stack([X, np.ones(len(X))])
    top = np.linalg.eigvalsh(Xb.T @ Xb / len(X))[-1]
    return 1.0 / (0.25 * top + l2)


def train_logistic(X, y, l2: float = 1e-4, step: float | None = None, epochs: int = 2000,
                   tol: float = 0.0) -> LogisticModel:
    """Fit by gradient descent from zero weights.

    ``step=None`` uses ``1/L`` for the smoothness constant of the objective,
    under which the per-epoch loss never increases.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size or y.size == 0:
        raise DomainError("X must be n x d with one label per row")
    if l2 < 0:
        raise DomainError("l2 must be non-negative")
    if step is None:
        step = lipschitz_step(X, l2)
    if step <= 0:
        raise DomainError("step must be positive")
    w = np.zeros(X.shape[1])
    b = 0.0
    trace = []
    for _ in range(epochs):
        loss, gw, gb = objective(w, b, X, y, l2)
        if not np.isfinite(loss):
            raise ConvergenceError(f"loss became non-finite with step={step}; use a smaller step",
                                   {"epoch": len(trace)})
        trace.append(loss)
        if tol and len(trace) > 1 and trace[-2] - trace[-1] < tol:
            break
        w = w - step * gw
        b = b - step * gb
    return LogisticModel(w, b, trace, {"l2": l2, "step": step, "epochs": epochs})
