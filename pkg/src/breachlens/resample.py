"""Encoding, scaling, stratified splitting and SMOTE oversampling.

All randomness comes from ``numpy.random.Generator`` seeded with a PCG64
bit generator (``numpy.random.default_rng(seed)``), whose stream is fixed
by algorithm and therefore reproducible across platforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

UNKNOWN = "Unknown"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class EncoderState:
    label_maps: dict[str, dict[str, int]] = field(default_factory=dict)
    minmax: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label_maps": {c: dict(sorted(m.items(), key=lambda kv: kv[1])) for c, m in self.label_maps.items()},
            "minmax": {c: list(v) for c, v in self.minmax.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderState":
        return cls({c: dict(m) for c, m in d["label_maps"].items()},
                   {c: tuple(v) for c, v in d["minmax"].items()})


@dataclass
class DataMatrix:
    column_names: list[str]
    rows: np.ndarray
    labels: np.ndarray | None = None
    encoders: EncoderState = field(default_factory=EncoderState)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.column_names):
            raise DomainError("rows must be an n x d matrix matching column_names")
        if not np.all(np.isfinite(self.rows)):
            raise DomainError("DataMatrix cells must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.rows.shape[0],):
                raise DomainError("labels must have one entry per row")

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.column_names.index(name)]

    def take(self, indices) -> "DataMatrix":
        idx = np.asarray(indices, dtype=int)
        labels = None if self.labels is None else self.labels[idx]
        return DataMatrix(list(self.column_names), self.rows[idx], labels, self.encoders)


# -- label encoding -------------------------------------------------------

def _category(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return UNKNOWN
    return str(v)


def label_encode_fit(column: Sequence) -> dict[str, int]:
    """Number the distinct categories 0..k-1 in lexicographic order.

    Missing values are read as "Unknown" before fitting.
    """
    cats = sorted({_category(v) for v in column})
    return {c: i for i, c in enumerate(cats)}


def label_encode_apply(column: Sequence, mapping: dict[str, int]) -> list[int]:
    out = []
    for v in column:
        c = _category(v)
        if c in mapping:
            out.append(mapping[c])
        elif UNKNOWN in mapping:
            out.append(mapping[UNKNOWN])
        else:
            raise DomainError(f"unseen category {c!r} and no {UNKNOWN!r} code to fall back on")
    return out


def label_decode(codes: Sequence[int], mapping: dict[str, int]) -> list[str]:
    inverse = {i: c for c, i in mapping.items()}
    return [inverse[int(i)] for i in codes]


# -- min-max scaling ----------------------------------------------------------

def minmax_fit(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DomainError("cannot fit min-max scaling on an empty column")
    return float(arr.min()), float(arr.max())


def minmax_apply(values: Sequence[float], params: tuple[float, float]) -> np.ndarray:
    lo, hi = params
    arr = np.asarray(values, dtype=float)
    if hi == lo:
        return np.zeros_like(arr)
    return np.clip((arr - lo) / (hi - lo), 0.0, 1.0)


def minmax_fit_apply(train_col: Sequence[float], other_col: Sequence[float] = ()) -> tuple[np.ndarray, np.ndarray]:
    params = minmax_fit(train_col)
    return minmax_apply(train_col, params), minmax_apply(other_col, params)


def scale_matrix(train: DataMatrix, *others: DataMatrix) -> list[DataMatrix]:
    """Min-max scale every column using parameters fitted on ``train`` only."""
    params = {c: minmax_fit(train.column(c)) for c in train.column_names}
    out = []
    for m in (train, *others):
        cols = [minmax_apply(m.column(c), params[c]) for c in m.column_names]
        enc = EncoderState(dict(m.encoders.label_maps), params)
        rows = np.column_stack(cols) if cols else m.rows.copy()
        out.append(DataMatrix(list(m.column_names), rows, m.labels, enc))
    return out


# -- splitting ------------------------------------------------------------

@dataclass
class SplitPlan:
    train_indices: list[int]
    test_indices: list[int]
    seed: int
    folds: list[tuple[list[int], list[int]]] | None = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "train": list(self.train_indices),
            "test": list(self.test_indices),
            "folds": None if self.folds is None else [{"train": t, "validation": v} for t, v in self.folds],
        }


def _class_members(labels) -> dict:
    y = np.asarray(labels)
    return {c: np.flatnonzero(y == c) for c in np.unique(y)}


def _proportional_allocation(counts: list[int], total: int) -> list[int]:
    """Largest-remainder apportionment of ``total`` across classes."""
    n = sum(counts)
    exact = [c * total / n for c in counts]
    alloc = [math.floor(e) for e in exact]
    remainders = sorted(range(len(counts)), key=lambda i: (-(exact[i] - alloc[i]), i))
    for i in remainders[: total - sum(alloc)]:
        alloc[i] += 1
    return alloc


def stratified_split(labels: Sequence, test_fraction: float, seed: int) -> SplitPlan:
    if not 0.0 < test_fraction < 1.0:
        raise DomainError("test_fraction must lie strictly between 0 and 1")
    members = _class_members(labels)
    for c, idx in members.items():
        if idx.size < 2:
            raise DomainError(f"class {c!r} has a single member; stratified split needs at least 2")
    n = len(labels)
    classes = sorted(members)
    counts = [members[c].size for c in classes]
    alloc = _proportional_allocation(counts, int(math.floor(n * test_fraction + 0.5)))
    rng = make_rng(seed)
    test = []
    for c, a in zip(classes, alloc):
        a = min(max(a, 1), members[c].size - 1)
        test.extend(rng.permutation(members[c])[:a].tolist())
    test_set = set(test)
    train = [i for i in range(n) if i not in test_set]
    return SplitPlan(train, sorted(test), seed)


def stratified_kfold(labels: Sequence, k: int, seed: int) -> list[tuple[list[int], list[int]]]:
    """Deal each class's shuffled members round-robin across ``k`` folds.

    The dealing position carries over between classes so fold sizes differ by
    at most one overall as well as per class.
    """
    if k < 2:
        raise DomainError("k must be at least 2")
    members = _class_members(labels)
    for c, idx in members.items():
        if idx.size < k:
            raise DomainError(f"class {c!r} has {idx.size} members, fewer than k={k}")
    rng = make_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for c in sorted(members):
        for i in rng.permutation(members[c]).tolist():
            folds[pos % k].append(i)
            pos += 1
    n = len(labels)
    out = []
    for f in folds:
        val = sorted(f)
        vs = set(val)
        out.append(([i for i in range(n) if i not in vs], val))
    return out


# -- SMOTE ----------------------------------------------------------------

def nearest_neighbors(rows: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows (Euclidean), ties by index."""
    diff = rows[:, None, :] - rows[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def smote(minority_rows, majority_count: int, k: int = 5, seed: int = 0) -> np.ndarray:
    """Synthesize minority rows until the minority matches ``majority_count``.

    Each synthetic row is ``x + u * (nn - x)`` for a uniformly drawn minority
    row ``x``, one of its ``min(k, m-1)`` nearest minority neighbours ``nn``
    and ``u ~ U[0, 1)``.
    """
    x = np.asarray(minority_rows, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DomainError("SMOTE needs a non-empty 2-D minority matrix")
    if k < 1:
        raise DomainError("k must be at least 1")
    m, d = x.shape
    need = majority_count - m
    if need <= 0:
        return np.empty((0, d))
    if m == 1:
        return np.repeat(x, need, axis=0)
    kk = min(k, m - 1)
    nn = nearest_neighbors(x, kk)
    rng = make_rng(seed)
    base = rng.integers(0, m, size=need)
    pick = rng.integers(0, kk, size=need)
    u = rng.random(need)
    neighbor = nn[base, pick]
    return x[base] + u[:, None] * (x[neighbor] - x[base])


def balance_with_smote(matrix: DataMatrix, k: int = 5, seed: int = 0) -> DataMatrix:
    """Append synthetic rows of the smaller class so both classes are equal in size."""
    if matrix.labels is None:
        raise DomainError("balancing requires labels")
    counts = {c: int((matrix.labels == c).sum()) for c in (0, 1)}
    minority = min(counts, key=lambda c: (counts[c], c))
    majority = 1 - minority
    synth = smote(matrix.rows[matrix.labels == minority], counts[majority], k, seed)
    rows = np.vstack([matrix.rows, synth])
    labels = np.concatenate([matrix.labels, np.full(len(synth), minority)])
    return DataMatrix(list(matrix.column_names), rows, labels, matrix.encoders)
