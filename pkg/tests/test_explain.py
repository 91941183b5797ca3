import math
from itertools import combinations

import numpy as np
import pytest

from mait.exceptions import AttributionError
from mait.explain import (
    correct_only_importance,
    explain_model,
    linear_shap,
    mc_shapley,
    pair_interactions,
    permutation_importance,
    shap_clusters,
    shap_significance,
    tree_shap,
    tree_shap_single,
    unify_importance,
)
from mait.explain.shap import expected_value
from mait.models import (
    GaussianNaiveBayes,
    HistGradientBoostingClassifier,
    L1LogisticRegression,
    RandomForestClassifier,
)
from mait.models._tree import Tree


def _cond_expectation(tree, x, S, node=0):
    """Path-dependent E[f | x_S]: follow x on features in S, cover-average otherwise."""
    f = tree.feature[node]
    if f < 0:
        return tree.value[node]
    l, r = tree.left[node], tree.right[node]
    if f in S:
        go_left = tree.missing_left[node] if math.isnan(x[f]) else x[f] <= tree.threshold[node]
        return _cond_expectation(tree, x, S, l if go_left else r)
    c = tree.cover[node]
    return (tree.cover[l] * _cond_expectation(tree, x, S, l) + tree.cover[r] * _cond_expectation(tree, x, S, r)) / c


def _brute_shapley(tree, x, D):
    phi = np.zeros(D)
    for j in range(D):
        others = [k for k in range(D) if k != j]
        for size in range(D):
            w = math.factorial(size) * math.factorial(D - size - 1) / math.factorial(D)
            for S in combinations(others, size):
                S = set(S)
                phi[j] += w * (_cond_expectation(tree, x, S | {j}) - _cond_expectation(tree, x, S))
    return phi


def _data(seed, n=200, D=4):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, D))
    y = ((X[:, 0] + X[:, 1] * X[:, 2] + 0.3 * r.normal(size=n)) > 0).astype(int)
    return X, y


def test_single_leaf_tree():
    t = Tree([-1], [0.0], [-1], [-1], [0.7], [10.0])
    assert np.all(tree_shap_single(t, np.ones((3, 2))) == 0.0)
    assert expected_value(t) == 0.7


def test_depth_one_example():
    t = Tree([0, -1, -1], [0.0, 0, 0], [1, -1, -1], [2, -1, -1], [0.0, 0.0, 1.0], [100.0, 50.0, 50.0])
    phi = tree_shap_single(t, [[1.0, 5.0, -2.0]])
    assert np.array_equal(phi[0], [0.5, 0.0, 0.0])


def test_tree_shap_matches_brute_force():
    X, y = _data(0)
    rf = RandomForestClassifier(n_trees=6, max_depth=3, seed=1).fit(X, y)
    hg = HistGradientBoostingClassifier(n_iter=4, max_leaves=4, min_leaf=5).fit(X, y)
    trees = rf.trees_ + hg.trees_
    assert max(t.depth() for t in trees) <= 3
    for t in trees:
        phi = tree_shap_single(t, X[:6])
        for i in range(6):
            assert np.max(np.abs(phi[i] - _brute_shapley(t, X[i], 4))) < 1e-9


def test_tree_shap_with_missing_values():
    X, y = _data(1)
    X[::7, 1] = np.nan
    hg = HistGradientBoostingClassifier(n_iter=3, max_leaves=6, min_leaf=5).fit(X, y)
    for t in hg.trees_:
        for i in (0, 7, 14):
            assert np.max(np.abs(tree_shap_single(t, X[i:i + 1])[0] - _brute_shapley(t, X[i], 4))) < 1e-9


def test_local_accuracy_additivity_and_dummy():
    X, y = _data(2)
    X[:, 3] = 1.0  # constant column never splits
    for model in (
        RandomForestClassifier(n_trees=15, seed=0).fit(X, y),
        HistGradientBoostingClassifier(n_iter=20).fit(X, y),
    ):
        s = tree_shap(model, X)
        assert np.max(np.abs(s.total() - model.predict_margin(X))) < 1e-6
        assert np.all(s.values[:, 3] == 0.0)
    rf = RandomForestClassifier(n_trees=5, seed=3).fit(X, y)
    whole = tree_shap(rf, X[:10]).values
    parts = sum(tree_shap_single(t, X[:10]) for t in rf.trees_) / 5
    assert np.max(np.abs(whole - parts)) < 1e-12


def test_symmetric_features_equal_attribution():
    # x0 and x1 play mirrored roles in a balanced depth-2 tree
    t = Tree(
        [0, 1, 1, -1, -1, -1, -1],
        [0.0, 0.0, 0.0, 0, 0, 0, 0],
        [1, 3, 5, -1, -1, -1, -1],
        [2, 4, 6, -1, -1, -1, -1],
        [0, 0, 0, 0.0, 1.0, 1.0, 2.0],
        [4.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0],
    )
    phi = tree_shap_single(t, [[1.0, 1.0], [-1.0, 1.0]])
    assert abs(phi[0, 0] - phi[0, 1]) < 1e-15
    assert abs(phi[1, 0] + phi[1, 1]) < 1e-15


def test_missing_cover_error():
    t = Tree([0, -1, -1], [0.0, 0, 0], [1, -1, -1], [2, -1, -1], [0.0, 0.0, 1.0], [10.0, 0.0, 10.0])
    with pytest.raises(AttributionError):
        tree_shap_single(t, [[0.0]])


def test_linear_shap_examples():
    class M:
        coef_ = np.array([2.0, 0.0])
        intercept_ = 0.5

    s = linear_shap(M, [[1.0, 1.0]], [0.0, 0.0])
    assert np.array_equal(s.values[0], [2.0, 0.0]) and s.base_value == 0.5
    assert np.all(linear_shap(M, [[3.0, 4.0]], [3.0, 4.0]).values == 0)
    X, y = _data(3)
    m = L1LogisticRegression(lam=0.01).fit(X, y)
    s = linear_shap(m, X, X.mean(axis=0))
    assert np.max(np.abs(s.total() - m.predict_margin(X))) < 1e-12


def test_mc_shapley_properties():
    X, y = _data(4)
    X[:, 3] = 2.0
    lr = L1LogisticRegression(lam=0.01).fit(X, y)
    bg = X[:40]
    s = mc_shapley(lr, X[50:55], bg, n_orderings=30, seed=0)
    exact = linear_shap(lr, X[50:55], bg.mean(axis=0))
    se = np.maximum(s.se, 1e-12)
    assert np.all(np.abs(s.values - exact.values) <= 3 * se + 1e-9)
    gnb = GaussianNaiveBayes().fit(X, y)
    g = mc_shapley(gnb, X[50:55], bg, n_orderings=30, seed=0)
    assert np.all(np.abs(g.values[:, 3]) <= 3 * g.se[:, 3] + 1e-12)
    assert np.max(np.abs(g.total() - gnb.predict_margin(X[50:55]))) < 1e-9
    with pytest.raises(AttributionError):
        mc_shapley(gnb, X[:2], X[:5])
    assert explain_model(gnb, X[:2], bg).se is not None


def test_permutation_importance():
    X, y = _data(5)
    X[:, 3] = 0.0
    rf = RandomForestClassifier(n_trees=20, seed=0).fit(X, y)
    imp = permutation_importance(rf, X, y, n_repeats=3, seed=1)
    assert imp.importance[3] == 0.0
    again = permutation_importance(rf, X, y, n_repeats=1, seed=4)
    assert np.array_equal(again.importance, permutation_importance(rf, X, y, n_repeats=1, seed=4).importance)
    hits = 0
    for s in range(10):
        r = np.random.default_rng(s)
        Z = r.normal(size=(200, 4))
        yz = (2 * Z[:, 2] + 0.5 * r.normal(size=200) > 0).astype(int)
        m = RandomForestClassifier(n_trees=30, seed=s).fit(Z, yz)
        hits += int(np.argmax(permutation_importance(m, Z, yz, n_repeats=3, seed=s).importance)) == 2
    assert hits >= 9


def test_pair_interactions():
    X, y = _data(6)
    lr = L1LogisticRegression(lam=0.01).fit(X, y)
    pi = pair_interactions(lr, X, y, n_repeats=5, seed=0, predict=lambda m: lr.predict_margin(m))
    assert len(pi.pairs) == 6
    hits = 0
    for s in range(10):
        r = np.random.default_rng(s)
        Z = r.uniform(-1, 1, size=(300, 4))
        yz = ((Z[:, 0] > 0) ^ (Z[:, 1] > 0)).astype(int)
        m = RandomForestClassifier(n_trees=30, seed=s).fit(Z, yz)
        pi = pair_interactions(m, Z, yz, n_repeats=3, seed=s)
        # the XOR pair is strongly non-additive; with this drop-based score it is the most negative
        hits += pi.pairs[int(np.argmax(np.abs(pi.score)))] == (0, 1)
    assert hits >= 9


def test_additive_model_has_no_interactions():
    r = np.random.default_rng(7)
    X = r.normal(size=(300, 3))
    y = (X[:, 0] + X[:, 1] + r.normal(size=300) > 0).astype(int)

    class Additive:
        def predict(self, m):
            return 1 / (1 + np.exp(-(m[:, 0] + m[:, 1])))

    add = Additive()
    # MCC at a fixed cut is not additive; AUC of a monotone additive score is checked via brier-free drop
    pi = pair_interactions(None, X, y, n_repeats=20, seed=1, predict=add.predict)
    assert np.all(np.abs(pi.score) <= 3 * pi.se + 0.02)


def test_shap_significance():
    vals = np.column_stack([np.full(50, 2.0), np.zeros(50)])
    res = shap_significance(vals, n_bootstrap=40, seed=0)
    assert res.crossing_fraction[1] == 0.0 and not res.significant[1]
    with pytest.raises(ValueError):
        shap_significance(vals, n_bootstrap=10)
    flagged = 0
    for s in range(10):
        r = np.random.default_rng(s)
        X = r.normal(size=(300, 5))
        y = (1.5 * X[:, 0] + r.normal(size=300) > 0).astype(int)
        m = L1LogisticRegression(lam=0.01).fit(X, y)
        sig = shap_significance(linear_shap(m, X, X.mean(axis=0)), n_bootstrap=100, seed=s)
        flagged += bool(sig.significant[0]) and not sig.significant[1:].any()
    assert flagged >= 9


def test_shap_clusters():
    r = np.random.default_rng(0)
    a = r.normal(loc=(5, 0), scale=0.3, size=(30, 2))
    b = r.normal(loc=(-5, 2), scale=0.3, size=(30, 2))
    vals = np.vstack([a, b])
    res = shap_clusters(vals, seed=1)
    assert res.k == 2
    assert len(set(res.labels[:30])) == 1 and len(set(res.labels[30:])) == 1 and res.labels[0] != res.labels[30]
    dup = shap_clusters(np.vstack([vals, vals]), seed=1)
    assert dup.k == 2
    assert np.allclose(np.sort(dup.importance, axis=0), np.sort(res.importance, axis=0), atol=1e-12)
    assert shap_clusters(vals, k_range=[3], seed=0).k == 3
    deg = shap_clusters(np.ones((10, 2)))
    assert deg.k == 1 and "DEGENERATE" in deg.flags
    y = np.r_[np.ones(30), np.zeros(30)].astype(int)
    assert len(shap_clusters(vals, y=y, p=y * 0.9, seed=0).metrics) == 2


def test_correct_only_importance():
    vals = np.array([[1.0, -2.0], [3.0, 0.0], [-1.0, 1.0]])
    y = np.array([1, 0, 1])
    assert np.allclose(correct_only_importance(vals, y, [0.9, 0.1, 0.8]), np.abs(vals).mean(axis=0))
    assert np.array_equal(correct_only_importance(vals, y, [0.9, 0.9, 0.1]), [1.0, 2.0])
    assert correct_only_importance(vals, y, [0.1, 0.9, 0.1]) is None
    wins = 0
    for s in range(10):
        r = np.random.default_rng(s)
        X = r.normal(size=(400, 3))
        y = (2 * X[:, 0] + 0.5 * r.normal(size=400) > 0).astype(int)
        flip = r.uniform(size=400) < 0.2
        y_noisy = np.where(flip, 1 - y, y)
        m = L1LogisticRegression(lam=0.01).fit(X, y_noisy)
        s_ = linear_shap(m, X, X.mean(axis=0))
        p = m.predict_proba(X)[:, 1]
        wins += correct_only_importance(s_, y_noisy, p)[0] >= s_.mean_abs()[0]
    assert wins >= 8


def test_unify_importance():
    t = unify_importance({"a": [0.0, 10.0]}, ["f", "g"])
    assert list(t.rank) == [2, 1]
    t = unify_importance({"a": [0.0, 10.0], "b": [0.0, 1.0]}, ["f", "g"])
    assert np.array_equal(t.unified, [0.0, 1.0])
    assert np.allclose(t.unified, np.mean([t.normalized[m] for m in t.normalized], axis=0))
    base = unify_importance({"a": [3.0, 1.0, 2.0], "b": [0.2, 0.9, 0.1]}, ["x", "y", "z"])
    moved = unify_importance({"a": [3.0, 1.0, 2.0], "b": [0.2, 0.9, 0.1], "c": [7.0, 3.0, 5.0]}, ["x", "y", "z"])
    scaled = unify_importance({"a": [30.0 + 4, 14.0, 24.0], "b": [0.2, 0.9, 0.1]}, ["x", "y", "z"])
    assert np.array_equal(base.rank, scaled.rank)
    assert moved.rank[0] == 1
    const = unify_importance({"a": [1.0, 1.0]}, ["p", "q"])
    assert "CONSTANT:a" in const.flags and list(const.rank) == [1, 2]
    with pytest.raises(ValueError):
        unify_importance({"a": [1.0]}, ["p", "q"])
