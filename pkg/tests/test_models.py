import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mait.exceptions import PredictionError, TrainingError
from mait.models import (
    GaussianNaiveBayes,
    HistGradientBoostingClassifier,
    L1LogisticRegression,
    LinearRegression,
    ModelSpec,
    RandomForestClassifier,
    RandomForestRegressor,
    class_weights,
    dump_model,
    fit_classifier,
    fit_regressor,
    load_model,
    predict_proba,
    predict_value,
    sample_hyperparameters,
)


def _data(seed=0, n=120, D=4):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, D))
    y = (X[:, 0] - 0.5 * X[:, 1] + r.normal(scale=0.7, size=n) > 0).astype(int)
    return X, y


def test_class_weights():
    w = class_weights([1] * 20 + [0] * 80)
    assert (w.positive, w.negative) == (2.5, 0.625)
    assert class_weights([0, 1, 0, 1]).positive == 1.0 == class_weights([0, 1, 0, 1]).negative
    w = class_weights([1, 0, 0, 0])
    assert w.positive == 2.0 and w.negative == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(TrainingError):
        class_weights([1, 1])


def test_logreg_full_shrinkage():
    X, y = _data()
    w = np.where(y == 1, 3.0, 1.0)
    m = L1LogisticRegression(lam=1e9).fit(X, y, sample_weight=w)
    assert np.all(m.coef_ == 0.0)
    prev = float(w @ y / w.sum())
    assert np.allclose(m.predict_proba(X)[:, 1], prev, atol=1e-12)


def test_logreg_margin_zero_is_half():
    X, y = _data()
    m = L1LogisticRegression(lam=0.01).fit(X, y)
    x0 = np.zeros((1, 4))
    m.coef_ = np.zeros(4)
    m.intercept_ = 0.0
    assert m.predict_proba(x0)[0, 1] == 0.5


def test_hgbt_no_iterations_base_rate():
    X, y = _data()
    m = HistGradientBoostingClassifier(n_iter=0).fit(X, y)
    assert np.allclose(m.predict_proba(X)[:, 1], y.mean(), atol=1e-12)


def test_hgbt_tree_walk_oracle():
    X, y = _data(2)
    X[3, 1] = np.nan
    m = HistGradientBoostingClassifier(n_iter=15, max_leaves=7, min_leaf=5).fit(X, y)

    def walk(tree, x):
        i = 0
        while tree.feature[i] >= 0:
            v = x[tree.feature[i]]
            if math.isnan(v):
                i = tree.left[i] if tree.missing_left[i] else tree.right[i]
            else:
                i = tree.left[i] if v <= tree.threshold[i] else tree.right[i]
        return tree.value[i]

    for x, p in zip(X[:20], m.predict_proba(X[:20])[:, 1]):
        raw = m.init_score_ + sum(walk(t, x) for t in m.trees_)
        assert abs(p - 1 / (1 + math.exp(-raw))) < 1e-12


def test_hgbt_loss_non_increasing():
    X, y = _data(4, n=300)
    m = HistGradientBoostingClassifier(n_iter=40, learning_rate=0.2).fit(X, y)
    assert np.all(np.diff(m.train_loss_) <= 1e-12)


def _hand_gnb(X, y, x, floor):
    post = []
    for c in (0, 1):
        xs = X[y == c, 0]
        mu = xs.mean()
        var = max(((xs - mu) ** 2).mean(), floor)
        lik = math.exp(-((x - mu) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
        post.append(lik * (y == c).mean())
    return post[1] / sum(post)


def test_gnb_hand_bayes():
    X = np.array([[1.0], [2.0], [4.0], [7.0]])
    y = np.array([0, 0, 1, 1])
    m = GaussianNaiveBayes().fit(X, y)
    floor = 1e-9 * X[:, 0].var()
    for x in (0.0, 3.0, 5.5):
        assert abs(m.predict_proba([[x]])[0, 1] - _hand_gnb(X, y, x, floor)) < 1e-9


def test_sample_weight_equivalence():
    X, y = _data(5, n=60, D=3)
    w = np.random.default_rng(1).integers(1, 4, len(y))
    Xd, yd = np.repeat(X, w, axis=0), np.repeat(y, w)
    a = GaussianNaiveBayes().fit(X, y, sample_weight=w.astype(float))
    b = GaussianNaiveBayes().fit(Xd, yd)
    assert np.max(np.abs(a.predict_proba(X) - b.predict_proba(X))) < 1e-12
    c = L1LogisticRegression(lam=0.01, tol=1e-10).fit(X, y, sample_weight=w.astype(float))
    d = L1LogisticRegression(lam=0.01, tol=1e-10).fit(Xd, yd)
    assert np.max(np.abs(c.coef_ - d.coef_)) < 1e-6


def test_constant_feature_invariance():
    X, y = _data(6, n=80, D=2)
    Xc = np.column_stack([X, np.full(len(y), 3.0)])
    g1 = GaussianNaiveBayes().fit(X, y).predict_proba(X)
    g2 = GaussianNaiveBayes().fit(Xc, y).predict_proba(Xc)
    assert np.allclose(g1, g2, atol=1e-12)
    l1 = L1LogisticRegression(lam=0.01, tol=1e-10).fit(X, y)
    l2 = L1LogisticRegression(lam=0.01, tol=1e-10).fit(Xc, y)
    assert l2.coef_[2] == 0.0
    assert np.allclose(l1.predict_proba(X), l2.predict_proba(Xc), atol=1e-6)


def test_random_forest_memorizes():
    X, y = _data(7, n=50)
    m = RandomForestClassifier(n_trees=1, bootstrap=False, max_features=None).fit(X, y)
    assert np.array_equal(m.predict_proba(X)[:, 1], y.astype(float))


def test_forest_tree_order_invariance_and_covers():
    X, y = _data(8, n=90)
    m = RandomForestClassifier(n_trees=12, seed=3).fit(X, y)
    p = m.predict_proba(X)
    m.trees_ = m.trees_[::-1]
    assert np.allclose(p, m.predict_proba(X), atol=1e-15)
    full = RandomForestClassifier(n_trees=3, bootstrap=False, seed=1).fit(X, y)
    for t in full.trees_:
        assert t.cover[t.is_leaf].sum() == len(y)


def test_fit_deterministic_across_threads():
    X, y = _data(9, n=100)
    spec = ModelSpec("random_forest", {"n_trees": 30}, seed=11)
    a = fit_classifier(spec, X, y, n_jobs=1)
    b = fit_classifier(spec, X, y, n_jobs=4)
    assert all(ta == tb for ta, tb in zip(a.trees_, b.trees_))


def test_training_errors():
    with pytest.raises(TrainingError):
        L1LogisticRegression().fit([[1.0], [2.0]], [1, 1])
    with pytest.raises(TrainingError):
        GaussianNaiveBayes().fit([[np.inf], [2.0]], [0, 1])
    with pytest.raises(TrainingError):
        LinearRegression().fit([[1.0]], [2.0])
    with pytest.raises(TrainingError):
        ModelSpec("random_forest", {"depth": 3})


def test_feature_mismatch():
    X, y = _data()
    m = fit_classifier(ModelSpec("logreg_l1"), X, y)
    with pytest.raises(PredictionError):
        predict_proba(m, X[:, :3])
    r = fit_regressor(ModelSpec("linear_reg"), X, X[:, 0])
    with pytest.raises(PredictionError):
        predict_value(r, X[:, :2])


def test_linear_regression_hand_system():
    # y = 1 + 2 a - 3 b exactly; normal equations solved by hand give these values
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 2.0]])
    y = 1 + 2 * X[:, 0] - 3 * X[:, 1]
    m = LinearRegression().fit(X, y)
    assert abs(m.intercept_ - 1) < 1e-9 and np.max(np.abs(m.coef_ - [2, -3])) < 1e-9
    m.coef_, m.intercept_ = np.array([2.0]), 1.0
    m.n_features_in_ = 1
    m.feature_names_ = ["x0"]
    assert predict_value(m, [[3.0]])[0] == 7.0


def test_regressors_constant_and_memorize():
    r = np.random.default_rng(0)
    X = r.normal(size=(40, 3))
    const = np.full(40, 2.5)
    assert np.allclose(fit_regressor(ModelSpec("linear_reg"), X, const).predict(X), 2.5, atol=1e-9)
    assert np.all(fit_regressor(ModelSpec("rf_reg", {"n_trees": 5}), X, const).predict(X) == 2.5)
    y = r.normal(size=40)
    tree = RandomForestRegressor(n_trees=1, bootstrap=False, max_features=None).fit(X, y)
    assert np.array_equal(tree.predict(X), y)
    assert predict_value(tree, np.empty((0, 3))).shape == (0,)


def test_rf_reg_tree_walk():
    r = np.random.default_rng(1)
    X = r.normal(size=(60, 3))
    y = X[:, 0] * 2 + r.normal(size=60)
    m = RandomForestRegressor(n_trees=7, seed=2).fit(X, y)

    def walk(tree, x):
        i = 0
        while tree.feature[i] >= 0:
            i = tree.left[i] if x[tree.feature[i]] <= tree.threshold[i] else tree.right[i]
        return tree.value[i]

    expect = [np.mean([walk(t, x) for t in m.trees_]) for x in X]
    assert np.allclose(m.predict(X), expect, atol=1e-12)


@given(st.sampled_from(["logreg_l1", "gnb", "random_forest", "hgbt", "rf_reg"]), st.integers(0, 10**6), st.integers(2, 5000), st.integers(1, 200))
def test_search_space_ranges(algo, seed, n, D):
    hp = sample_hyperparameters(algo, np.random.default_rng(seed), n, D)
    ModelSpec(algo, hp)
    if algo == "logreg_l1":
        assert 1e-4 <= hp["lam"] <= 1e2
    elif algo == "gnb":
        assert -12 <= hp["var_smoothing_exp"] <= -6
    elif algo in ("random_forest", "rf_reg"):
        assert 100 <= hp["n_trees"] <= 500 and 1 <= hp["min_leaf"] <= max(1, n // 50)
    else:
        assert 0.01 <= hp["learning_rate"] <= 0.3 and 7 <= hp["max_leaves"] <= 63
        assert 50 <= hp["n_iter"] <= 500 and 1e-3 <= hp["l2"] <= 10


@pytest.mark.parametrize("algo", ["logreg_l1", "gnb", "random_forest", "hgbt"])
def test_serialize_round_trip(algo):
    X, y = _data(3)
    small = {"random_forest": {"n_trees": 5}, "hgbt": {"n_iter": 5}}.get(algo, {})
    m = fit_classifier(ModelSpec(algo, small, seed=1), X, y, feature_names=[f"f{j}" for j in range(4)])
    text = dump_model(m)
    back = load_model(text)
    assert np.array_equal(back.predict_proba(X), m.predict_proba(X))
    assert dump_model(back) == text


def test_serialize_regressors():
    r = np.random.default_rng(2)
    X = r.normal(size=(30, 2))
    y = X[:, 0] + r.normal(size=30)
    for spec in (ModelSpec("linear_reg"), ModelSpec("rf_reg", {"n_trees": 4})):
        m = fit_regressor(spec, X, y)
        assert np.array_equal(load_model(dump_model(m)).predict(X), m.predict(X))
