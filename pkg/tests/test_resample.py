import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from breachlens.errors import DomainError
from breachlens.resample import (DataMatrix, EncoderState, balance_with_smote, label_decode, label_encode_apply,
                                 label_encode_fit, make_rng, minmax_fit_apply, nearest_neighbors, scale_matrix,
                                 smote, stratified_kfold, stratified_split)


def test_label_encode_fit():
    assert label_encode_fit(["b", "a", "a"]) == {"a": 0, "b": 1}
    assert label_encode_fit([None]) == {"Unknown": 0}
    assert label_encode_fit(["x", "x"]) == {"x": 0}


def test_label_encode_apply():
    m = {"a": 0, "b": 1}
    assert label_encode_apply(["b", "a"], m) == [1, 0]
    assert label_encode_apply([], m) == []
    m2 = label_encode_fit(["a", "b", None])
    assert label_encode_apply(["z"], m2) == [m2["Unknown"]]
    with pytest.raises(DomainError):
        label_encode_apply(["z"], m)


@given(st.lists(st.text(min_size=1, max_size=4), min_size=1, max_size=20))
def test_label_round_trip(col):
    m = label_encode_fit(col)
    assert sorted(m.values()) == list(range(len(m)))
    assert label_decode(label_encode_apply(col, m), m) == col


def test_minmax():
    a, _ = minmax_fit_apply([0, 5, 10])
    assert a.tolist() == [0, 0.5, 1]
    assert minmax_fit_apply([7, 7])[0].tolist() == [0, 0]
    assert minmax_fit_apply([0, 10], [12, -3])[1].tolist() == [1.0, 0.0]
    with pytest.raises(DomainError):
        minmax_fit_apply([])


def test_scale_matrix_uses_train_parameters():
    tr = DataMatrix(["x", "y"], [[0, 1], [10, 3]])
    te = DataMatrix(["x", "y"], [[5, 5]])
    s_tr, s_te = scale_matrix(tr, te)
    assert s_te.rows.tolist() == [[0.5, 1.0]]
    assert s_tr.encoders.minmax == {"x": (0.0, 10.0), "y": (1.0, 3.0)}


def test_data_matrix_invariants():
    with pytest.raises(DomainError):
        DataMatrix(["a"], [[1.0, 2.0]])
    with pytest.raises(DomainError):
        DataMatrix(["a"], [[np.nan]])
    with pytest.raises(DomainError):
        DataMatrix(["a"], [[1.0]], labels=[0, 1])
    enc = EncoderState({"c": {"Unknown": 0, "a": 1}}, {"c": (0.0, 1.0)})
    assert EncoderState.from_dict(enc.to_dict()) == enc


def test_stratified_split_allocation():
    y = [0] * 80 + [1] * 20
    plan = stratified_split(y, 0.2, seed=1)
    test_y = [y[i] for i in plan.test_indices]
    assert test_y.count(0) == 16 and test_y.count(1) == 4
    assert sorted(plan.train_indices + plan.test_indices) == list(range(100))
    p2 = stratified_split([0] * 10, 0.5, seed=0)
    assert len(p2.test_indices) == 5 and len(p2.train_indices) == 5
    assert stratified_split(y, 0.2, 1) == plan
    assert stratified_split(y, 0.2, 2).test_indices != plan.test_indices
    with pytest.raises(DomainError, match="1"):
        stratified_split([0, 0, 0, 1], 0.25, 0)


@settings(max_examples=40)
@given(st.integers(2, 60), st.integers(2, 60), st.floats(0.1, 0.5), st.integers(0, 2 ** 32))
def test_split_proportion_within_one(n0, n1, frac, seed):
    y = [0] * n0 + [1] * n1
    plan = stratified_split(y, frac, seed)
    assert not set(plan.train_indices) & set(plan.test_indices)
    n_test = len(plan.test_indices)
    for c, cnt in ((0, n0), (1, n1)):
        got = sum(y[i] == c for i in plan.test_indices)
        assert abs(got - cnt * n_test / (n0 + n1)) <= 1 + 1e-9


def test_kfold():
    folds = stratified_kfold([0, 1] * 5, 5, seed=0)
    for tr, va in folds:
        assert len(va) == 2 and sorted([i % 2 for i in va]) == [0, 1]
        assert sorted(tr + va) == list(range(10))
    assert sorted(i for _, va in folds for i in va) == list(range(10))
    with pytest.raises(DomainError):
        stratified_kfold([0, 1, 2, 3], 4, 0)


def test_smote_segment_and_degenerate():
    out = smote([[0.0], [1.0]], 5, k=5, seed=0)
    assert out.shape == (3, 1) and np.all((out >= 0) & (out <= 1))
    single = smote([[2.0, 3.0]], 4, seed=0)
    assert np.array_equal(single, np.repeat([[2.0, 3.0]], 3, axis=0))
    assert smote([[0.0], [1.0]], 2).shape == (0, 1)
    assert smote([[0.0], [1.0]], 1).shape == (0, 1)
    with pytest.raises(DomainError):
        smote(np.empty((0, 2)), 3)


def test_smote_neighbours_are_nearest():
    rows = np.array([[0.0], [1.0], [10.0], [10.5]])
    assert nearest_neighbors(rows, 1)[:, 0].tolist() == [1, 0, 3, 2]
    out = smote(rows, 50, k=1, seed=3)
    for p in out:
        assert (0 <= p[0] <= 1) or (10 <= p[0] <= 10.5)


def test_balance_with_smote_counts_and_segments():
    rng = make_rng(7)
    maj = rng.normal(size=(40, 3))
    mino = rng.normal(3, 1, size=(9, 3))
    m = DataMatrix(["a", "b", "c"], np.vstack([maj, mino]), [0] * 40 + [1] * 9)
    bal = balance_with_smote(m, k=5, seed=1)
    assert (bal.labels == 0).sum() == (bal.labels == 1).sum() == 40
    assert np.array_equal(bal.rows[:49], m.rows)
    for p in bal.rows[49:]:
        assert oracles.on_segment(p, mino)
