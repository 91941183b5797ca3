import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mait.data import CATEGORICAL, CONTINUOUS, Table
from mait.exceptions import ImputationError, PropagationError
from mait.preprocess import (
    OTHER,
    KNNImputer,
    LabelPropagation,
    RobustScaler,
    apply_knn_impute,
    apply_one_hot,
    apply_rare_merge,
    apply_robust_scale,
    fit_knn_impute,
    fit_one_hot,
    fit_rare_merge,
    fit_robust_scale,
    propagate_labels,
    random_oversample,
)


def _cat_table(values):
    return Table.from_dict({"c": values}, {"c": CATEGORICAL})


def test_rare_merge_rules():
    train = _cat_table(["a"] * 99 + ["b"])
    state = fit_rare_merge(train, 0.05, "train")
    assert list(apply_rare_merge(state, train).column("c"))[-1] == OTHER
    test = _cat_table(["a", "Z", None])
    assert list(apply_rare_merge(state, test).column("c")) == ["a", OTHER, None]
    frequent = _cat_table(["a", "b"] * 10)
    s2 = fit_rare_merge(frequent, 0.05)
    assert apply_rare_merge(s2, frequent).equals(frequent)


def test_one_hot_indicators_and_width():
    t = Table.from_dict(
        {"x": [1.0, 2.0, 3.0], "c": ["B", None, "A"], "d": ["p", "q", "r"], "e": ["u", "v", "u"]},
        {"x": CONTINUOUS, "c": CATEGORICAL, "d": CATEGORICAL, "e": CATEGORICAL},
    )
    state = fit_one_hot(t.select(["x", "c", "d"]))
    assert state.params["c"] == ("A", "B")
    out = apply_one_hot(state, t.select(["x", "c", "d"]))
    assert out.names == ["x", "c=A", "c=B", "d=p", "d=q", "d=r"]
    m = out.matrix(out.names)
    assert m[0, 1:3].tolist() == [0.0, 1.0]
    assert m[1, 1:3].tolist() == [0.0, 0.0]
    vocab3 = Table.from_dict({"a": ["A", "B", "C"]}, {"a": CATEGORICAL})
    row = apply_one_hot(fit_one_hot(vocab3), vocab3).matrix(["a=A", "a=B", "a=C"])[1]
    assert row.tolist() == [0.0, 1.0, 0.0]
    # 1 continuous + categoricals with 2 and 3 categories -> width 6
    t2 = t.select(["x", "e", "d"])
    assert apply_one_hot(fit_one_hot(t2), t2).column_count == 6


@given(st.lists(st.sampled_from(["a", "b", "c", None]), min_size=1, max_size=30))
def test_one_hot_blocks(values):
    t = _cat_table(values)
    out = apply_one_hot(fit_one_hot(t), t)
    if out.column_count == 0:
        return
    m = out.matrix(out.names)
    assert set(np.unique(m)) <= {0.0, 1.0}
    sums = m.sum(axis=1)
    for v, s in zip(values, sums):
        assert s == (0.0 if v is None else 1.0)


def _knn_oracle(target, donors, col, k):
    D = donors.shape[1]
    cands = []
    for i, d in enumerate(donors):
        if math.isnan(d[col]):
            continue
        shared = [j for j in range(D) if not math.isnan(target[j]) and not math.isnan(d[j])]
        if not shared:
            continue
        dist = math.sqrt(sum((target[j] - d[j]) ** 2 for j in shared) * D / len(shared))
        cands.append((dist, i))
    cands.sort()
    return sum(donors[i, col] for _, i in cands[:k]) / len(cands[:k])


def test_knn_examples():
    donors = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [0.0, 9.0, 1.0]])
    state = fit_knn_impute(donors, 1, "train")
    target = np.array([[4.0, np.nan, 6.0]])
    assert apply_knn_impute(state, target)[0, 1] == 5.0
    const = np.array([[0.0, 7.0], [1.0, 7.0], [2.0, 7.0]])
    for k in (1, 2, 3, 5):
        assert apply_knn_impute(fit_knn_impute(const, k), np.array([[9.0, np.nan]]))[0, 1] == 7.0
    r = np.random.default_rng(5)
    train = r.normal(size=(5, 3))
    train[2, 0] = np.nan
    row = np.array([0.3, np.nan, -0.2])
    got = apply_knn_impute(fit_knn_impute(train, 2), row[None, :])[0, 1]
    assert abs(got - _knn_oracle(row, train, 1, 2)) < 1e-12


def test_knn_all_missing_column_named():
    X = np.array([[1.0, np.nan], [2.0, np.nan]])
    with pytest.raises(ImputationError, match="bmi"):
        KNNImputer(2).fit(X, feature_names=["age", "bmi"])


def test_knn_table_interface_and_observed_cells():
    r = np.random.default_rng(1)
    data = r.normal(size=(40, 4))
    mask = r.random(data.shape) < 0.15
    mask[:, 0] = False
    holey = np.where(mask, np.nan, data)
    t = Table.from_dict({f"v{j}": holey[:, j] for j in range(4)}, {f"v{j}": CONTINUOUS for j in range(4)})
    state = fit_knn_impute(t, 3, "train")
    out = apply_knn_impute(state, t).matrix(t.names)
    assert not np.isnan(out).any()
    assert np.array_equal(out[~mask], holey[~mask])


def test_robust_scale_example():
    X = np.array([[1.0], [2.0], [3.0], [4.0], [5.0]])
    state = fit_robust_scale(X)
    assert state.params["median"][0] == 3.0 and state.params["iqr"][0] == 2.0
    assert apply_robust_scale(state, X).ravel().tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    const = np.column_stack([X.ravel(), np.full(5, 4.0)])
    st_c = fit_robust_scale(const)
    assert st_c.flags == (1,)
    assert np.array_equal(apply_robust_scale(st_c, const)[:, 1], const[:, 1])
    holes = np.array([[np.nan], [3.0]])
    assert np.isnan(apply_robust_scale(state, holes)[0, 0])


@given(arrays(np.int64, (12, 3), elements=st.integers(-10**6, 10**6)))
def test_robust_scale_inverse(X):
    X = X / 64.0
    sc = RobustScaler().fit(X)
    back = sc.inverse_transform(sc.transform(X))
    assert np.allclose(back, X, atol=1e-12 * (1 + np.abs(X).max()), rtol=0)


def test_fit_state_unchanged_by_apply():
    r = np.random.default_rng(3)
    train = r.normal(size=(20, 3))
    train[0, 1] = np.nan
    other = r.normal(size=(10, 3))
    other[:, 2] = np.nan
    for fit, apply in ((fit_knn_impute, apply_knn_impute), (fit_robust_scale, apply_robust_scale)):
        state = fit(train, 2) if fit is fit_knn_impute else fit(train)
        before = state.fingerprint()
        apply(state, train)
        apply(state, other)
        assert state.fingerprint() == before


def test_label_propagation_examples():
    r = np.random.default_rng(11)
    a = r.normal(size=(20, 2)) * 0.3
    b = r.normal(size=(20, 2)) * 0.3 + 6
    X = np.vstack([a, b])
    y = np.full(40, -1.0)
    y[0], y[25] = 0, 1
    # the median-distance bandwidth is about the blob gap here, so pass one at blob scale
    labels, conf = propagate_labels(X, y, sigma=1.0)
    assert labels[:20].tolist() == [0] * 20 and labels[20:].tolist() == [1] * 20
    full = np.array([0, 1] * 20, dtype=float)
    lab2, conf2 = propagate_labels(X, full)
    assert np.array_equal(lab2, full.astype(int)) and np.all(conf2 == 1.0)
    with pytest.raises(PropagationError):
        propagate_labels(X, np.where(np.arange(40) == 0, 0.0, np.nan))


def test_label_propagation_tol_vs_max_iter():
    r = np.random.default_rng(2)
    X = r.normal(size=(30, 2))
    y = np.full(30, np.nan)
    y[:3], y[3:6] = 0, 1
    early = LabelPropagation(tol=1e-6, max_iter=5000).fit(X, y)
    assert early.n_iter_ < 5000
    late = LabelPropagation(tol=0.0, max_iter=early.n_iter_ + 200).fit(X, y)
    assert np.array_equal(early.labels_, late.labels_)
    assert np.max(np.abs(early.label_distributions_ - late.label_distributions_)) < 1e-4


@given(st.lists(st.sampled_from([0.0, 1.0, np.nan]), min_size=6, max_size=25), st.integers(0, 1000))
def test_label_propagation_keeps_known(y, seed):
    y = np.array(y)
    if not (np.any(y == 0) and np.any(y == 1)):
        return
    X = np.random.default_rng(seed).normal(size=(len(y), 2))
    labels, _ = propagate_labels(X, y)
    known = ~np.isnan(y)
    assert np.array_equal(labels[known], y[known].astype(int))


def test_oversample():
    y = np.array([1] * 20 + [0] * 80)
    x = np.arange(100)[:, None]
    xr, yr, idx = random_oversample(x, y, seed=4)
    assert (yr == 1).sum() == 80 and (yr == 0).sum() == 80
    assert np.array_equal(idx[:100], np.arange(100))
    _, _, idx2 = random_oversample(x, y, seed=4)
    assert np.array_equal(idx, idx2)
    bal = np.array([0, 1] * 5)
    xb, yb, _ = random_oversample(np.arange(10)[:, None], bal, seed=1)
    assert np.array_equal(yb, bal)
