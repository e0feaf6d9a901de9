"""Classification metrics at a probability threshold."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DomainError
from ..stats import rankdata

LOG_LOSS_EPS = 1e-15


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float
    log_loss: float
    confusion: dict[str, int]
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _check(probabilities, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels, dtype=int)
    if p.shape != y.shape or p.ndim != 1:
        raise DomainError("probabilities and labels must be equal-length vectors")
    if not np.isin(y, (0, 1)).all():
        raise DomainError("labels must be 0 or 1")
    return p, y


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve from average ranks (ties count one half).

    Returns NaN when only one class is present.
    """
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    r = rankdata(s)
    return float((r[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores, labels) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) at every distinct score, highest threshold first."""
    s, y = _check(scores, labels)
    n_pos, n_neg = int(y.sum()), int((1 - y).sum())
    pts = [(0.0, 0.0, math.inf)]
    for t in sorted(set(s.tolist()), reverse=True):
        pred = s >= t
        tp = int((pred & (y == 1)).sum())
        fp = int((pred & (y == 0)).sum())
        pts.append((fp / n_neg if n_neg else 0.0, tp / n_pos if n_pos else 0.0, float(t)))
    return pts


def log_loss(probabilities, labels) -> float:
    p, y = _check(probabilities, labels)
    p = np.clip(p, LOG_LOSS_EPS, 1 - LOG_LOSS_EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def evaluate(probabilities, labels, threshold: float = 0.5) -> Metrics:
    p, y = _check(probabilities, labels)
    pred = (p >= threshold).astype(int)
    tp = int(((pred == 1) & (y == 1)).sum())
    tn = int(((pred == 0) & (y == 0)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    flags = []

    def ratio(num, den, name):
        if den == 0:
            flags.append(f"{name}_undefined")
            return 0.0
        return num / den

    accuracy = ratio(tp + tn, tp + tn + fp + fn, "accuracy")
    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    auc = roc_auc(p, y) if y.size else math.nan
    if math.isnan(auc):
        flags.append("roc_auc_undefined")
        auc = 0.0
    ll = log_loss(p, y) if y.size else 0.0
    return Metrics(accuracy, precision, recall, f1, auc, ll,
                   {"tp": tp, "tn": tn, "fp": fp, "fn": fn}, flags)
