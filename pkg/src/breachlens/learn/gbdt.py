"""Second-order gradient-boosted decision trees for binary log loss.

Each round fits one regression tree to the gradients ``g = p - y`` and
hessians ``h = p (1 - p)`` of the current model. Leaves take the Newton
weight ``-G / (H + lambda)`` and splits maximise

    gain = 1/2 [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda) ]

over every feature and every threshold between sorted unique values. A row
goes left when ``x[feature] <= threshold``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from .logistic import sigmoid

BASE_RATE_CLAMP = 1e-6
_DENOM_FLOOR = 1e-16

PRESETS: dict[str, dict] = {
    # exact greedy, level-wise
    "xgb-like": {"rounds": 100, "depth": 4, "learning_rate": 0.1, "min_leaf": 1,
                 "l2_lambda": 1.0, "growth": "level", "max_leaves": None},
    # best-first growth bounded by a leaf budget
    "lgbm-like": {"rounds": 100, "depth": 6, "learning_rate": 0.1, "min_leaf": 5,
                  "l2_lambda": 0.0, "growth": "leaf", "max_leaves": 15},
}


@dataclass
class Tree:
    feature: np.ndarray     # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        # route index sets node by node; each level touches every row once
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            f = self.feature[node]
            if f < 0:
                out[idx] = self.value[node]
                continue
            go_left = X[idx, f] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out

    def depth(self) -> int:
        def d(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(d(self.left[i]), d(self.right[i]))
        return d(0)

    def features_used(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def to_dict(self) -> dict:
        def node(i):
            if self.feature[i] < 0:
                return {"leaf": float(self.value[i])}
            return {"feature": int(self.feature[i]), "threshold": float(self.threshold[i]),
                    "left": node(self.left[i]), "right": node(self.right[i])}
        return node(0)

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        b = _TreeBuilder()

        def add(nd):
            i = b.new_leaf(nd.get("leaf", 0.0))
            if "leaf" not in nd:
                b.make_split(i, nd["feature"], nd["threshold"], add(nd["left"]), add(nd["right"]))
            return i

        add(d)
        return b.build()


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def new_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.feature) - 1

    def make_split(self, i, feature, threshold, left, right):
        self.feature[i] = int(feature)
        self.threshold[i] = float(threshold)
        self.left[i], self.right[i] = left, right
        self.value[i] = 0.0

    def build(self) -> Tree:
        return Tree(np.array(self.feature, dtype=np.int64), np.array(self.threshold, dtype=float),
                    np.array(self.left, dtype=np.int64), np.array(self.right, dtype=np.int64),
                    np.array(self.value, dtype=float))


@dataclass
class GbdtConfig:
    rounds: int = 100
    depth: int = 4
    learning_rate: float = 0.1
    min_leaf: int = 1
    l2_lambda: float = 1.0
    growth: str = "level"
    max_leaves: int | None = None
    min_split_gain: float = 0.0

    def __post_init__(self):
        if self.rounds < 1 or self.depth < 0 or self.min_leaf < 1:
            raise DomainError("rounds >= 1, depth >= 0 and min_leaf >= 1 are required")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DomainError("learning_rate must lie in (0, 1]")
        if self.l2_lambda < 0:
            raise DomainError("l2_lambda must be non-negative")
        if self.growth not in ("level", "leaf"):
            raise DomainError("growth must be 'level' or 'leaf'")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GbdtModel:
    base_score: float
    trees: list[Tree]
    learning_rate: float
    config: GbdtConfig
    n_features: int
    training_trace: list[float] = field(default_factory=list)

    kind = "gbdt"

    def raw_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DomainError(f"expected {self.n_features} features, got shape {X.shape}")
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.raw_score(X))

    def features_used(self) -> set[int]:
        used = set()
        for t in self.trees:
            used |= t.features_used()
        return used

    def to_dict(self) -> dict:
        return {"kind": self.kind, "base_score": self.base_score, "learning_rate": self.learning_rate,
                "n_features": self.n_features, "config": self.config.to_dict(),
                "trees": [t.to_dict() for t in self.trees], "training_trace": list(self.training_trace)}

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        return cls(float(d["base_score"]), [Tree.from_dict(t) for t in d["trees"]],
                   float(d["learning_rate"]), GbdtConfig(**d["config"]), int(d["n_features"]),
                   list(d.get("training_trace", [])))


def _leaf_weight(G: float, H: float, lam: float) -> float:
    return -G / max(H + lam, _DENOM_FLOOR)


def _score(G, H, lam):
    return G * G / np.maximum(H + lam, _DENOM_FLOOR)


def _best_split(X, g, h, idx, cfg: GbdtConfig):
    """Best (gain, feature, threshold) for the rows ``idx``, or None.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    G, H = g[idx].sum(), h[idx].sum()
    parent = G * G / max(H + cfg.l2_lambda, _DENOM_FLOOR)
    n = idx.size
    if n < 2:
        return None
    xs = X[idx]
    order = np.argsort(xs, axis=0, kind="stable")
    xs = np.take_along_axis(xs, order, axis=0)
    GL = np.cumsum(g[idx][order], axis=0)[:-1]
    HL = np.cumsum(h[idx][order], axis=0)[:-1]
    n_left = np.arange(1, n)[:, None]
    valid = (xs[:-1] != xs[1:]) & (n_left >= cfg.min_leaf) & (n - n_left >= cfg.min_leaf)
    if not valid.any():
        return None
    gain = 0.5 * (_score(GL, HL, cfg.l2_lambda) + _score(G - GL, H - HL, cfg.l2_lambda) - parent)
    gain = np.where(valid, gain, -np.inf)
    # first maximum per column is the lowest threshold; first best column the lowest feature
    best_row = np.argmax(gain, axis=0)
    col_best = gain[best_row, np.arange(gain.shape[1])]
    f = int(np.argmax(col_best))
    best = (float(col_best[f]), f, float(xs[best_row[f], f]))
    if best[0] < cfg.min_split_gain:
        return None
    return best


def _fit_tree(X, g, h, cfg: GbdtConfig) -> Tree:
    b = _TreeBuilder()
    lam = cfg.l2_lambda
    all_idx = np.arange(X.shape[0])
    root = b.new_leaf(_leaf_weight(g.sum(), h.sum(), lam))

    def split(node, idx, found):
        _, f, thr = found
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        left = b.new_leaf(_leaf_weight(g[li].sum(), h[li].sum(), lam))
        right = b.new_leaf(_leaf_weight(g[ri].sum(), h[ri].sum(), lam))
        b.make_split(node, f, thr, left, right)
        return (left, li), (right, ri)

    if cfg.growth == "level":
        frontier = [(root, all_idx)]
        for _ in range(cfg.depth):
            nxt = []
            for node, idx in frontier:
                found = _best_split(X, g, h, idx, cfg)
                if found is not None:
                    nxt.extend(split(node, idx, found))
            frontier = nxt
    else:
        max_leaves = cfg.max_leaves or 2 ** cfg.depth
        heap, counter, leaves = [], 0, 1

        def push(node, idx, depth):
            nonlocal counter
            if depth >= cfg.depth:
                return
            found = _best_split(X, g, h, idx, cfg)
            if found is not None:
                heapq.heappush(heap, (-found[0], counter, node, idx, depth, found))
                counter += 1

        push(root, all_idx, 0)
        while heap and leaves < max_leaves:
            _, _, node, idx, depth, found = heapq.heappop(heap)
            (l, li), (r, ri) = split(node, idx, found)
            leaves += 1
            push(l, li, depth + 1)
            push(r, ri, depth + 1)
    return b.build()


def _mean_log_loss(raw: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def train_gbdt(X, y, config: GbdtConfig | dict | None = None, **overrides) -> GbdtModel:
    if config is None:
        config = GbdtConfig(**overrides)
    elif isinstance(config, dict):
        config = GbdtConfig(**{**config, **overrides})
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size or y.size == 0:
        raise DomainError("X must be n x d with one label per row")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DomainError("labels must be 0 or 1")
    rate = min(max(float(y.mean()), BASE_RATE_CLAMP), 1.0 - BASE_RATE_CLAMP)
    base = math.log(rate / (1.0 - rate))
    model = GbdtModel(base, [], config.learning_rate, config, X.shape[1])
    raw = np.full(y.size, base)
    model.training_trace.append(_mean_log_loss(raw, y))
    if y.min() == y.max():
        return model
    for _ in range(config.rounds):
        p = sigmoid(raw)
        tree = _fit_tree(X, p - y, p * (1.0 - p), config)
        model.trees.append(tree)
        raw = raw + config.learning_rate * tree.predict(X)
        model.training_trace.append(_mean_log_loss(raw, y))
    return model
