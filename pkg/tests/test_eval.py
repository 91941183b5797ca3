import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.isotonic import IsotonicRegression

from mait.eval import (
    SplitConformalClassifier,
    compute_metrics,
    conformal_quantile,
    conformal_set,
    coverage,
    cross_validate,
    isotonic_calibrate,
    net_benefit_curve,
    pava,
    random_search,
    roc_auc,
    average_precision,
    select_best,
    stratified_folds,
    tune_threshold,
    uncertainty_filter,
)
from mait.eval.cv import CandidateResult, CVResult, FoldRecord
from mait.exceptions import CalibrationError, ConformalError, FoldError

labels = st.lists(st.integers(0, 1), min_size=2, max_size=30)


def _pairs_auc(y, p):
    pos = [pi for yi, pi in zip(y, p) if yi == 1]
    neg = [pi for yi, pi in zip(y, p) if yi == 0]
    total = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a, b in product(pos, neg))
    return total / (len(pos) * len(neg))


def _brute_ap(y, p):
    # precision at every distinct threshold, weighted by the recall gained there
    y, p = np.asarray(y), np.asarray(p)
    ap, prev_recall = 0.0, 0.0
    for t in sorted(set(p), reverse=True):
        sel = p >= t
        tp = np.sum(sel & (y == 1))
        recall = tp / y.sum()
        ap += (recall - prev_recall) * tp / sel.sum()
        prev_recall = recall
    return ap


def test_metric_examples_from_counts():
    y = [1, 1, 0, 0, 0, 0]
    p = [0.9, 0.8, 0.7, 0.2, 0.1, 0.3]
    m = compute_metrics(y, p, 0.5)
    assert (m.tp, m.fp, m.tn, m.fn) == (2, 1, 3, 0)
    assert abs(m.mcc - 6 / math.sqrt(72)) < 1e-12
    assert m.sensitivity == 1.0 and m.specificity == 0.75
    assert abs(m.ppv - 2 / 3) < 1e-12 and abs(m.f1 - 0.8) < 1e-12
    assert m.balanced_accuracy == 0.875


def test_auc_example_and_perfect():
    assert compute_metrics([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]).auc == 0.75
    m = compute_metrics([0, 1, 1, 0], [0.0, 1.0, 1.0, 0.0])
    assert m.brier == 0.0 and m.mcc == 1.0


def test_single_class_flags():
    m = compute_metrics([1, 1, 1], [0.2, 0.6, 0.9])
    assert math.isnan(m.auc) and math.isnan(m.pr_auc)
    assert "auc_undefined" in m.flags and m.sensitivity == 2 / 3
    m = compute_metrics([0, 1], [0.1, 0.2], threshold=0.9)
    assert m.mcc == 0.0 and m.ppv == 0.0 and "ppv" in m.flags


@given(labels, st.data())
def test_auc_ap_against_brute_force(y, data):
    if len(set(y)) < 2:
        return
    p = data.draw(st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.7, 1.0]), min_size=len(y), max_size=len(y)))
    assert abs(roc_auc(y, p) - _pairs_auc(y, p)) < 1e-12
    assert abs(average_precision(y, p) - _brute_ap(y, p)) < 1e-12


@given(labels, st.data())
def test_metric_invariants(y, data):
    p = np.array(data.draw(st.lists(st.integers(0, 64), min_size=len(y), max_size=len(y)))) / 64.0
    y = np.array(y)
    m = compute_metrics(y, p, 0.5)
    assert m.tp + m.fp + m.tn + m.fn == len(y)
    for name in ("ppv", "npv", "sensitivity", "specificity", "f1", "balanced_accuracy", "brier"):
        assert 0.0 <= getattr(m, name) <= 1.0
    assert -1.0 - 1e-12 <= m.mcc <= 1.0 + 1e-12
    # label and prediction flip: predicted-1 set becomes predicted-0 set
    flip = compute_metrics(1 - y, -p, -0.5 + 1e-300)
    if len(set(p)) == len(p) and not np.any(p == 0.5):
        assert abs(flip.mcc - m.mcc) < 1e-12
    if len(set(y)) == 2 and len(set(p)) == len(p):
        assert abs(roc_auc(y, p) + roc_auc(y, 1 - p) - 1) < 1e-12
        q = np.exp(3 * p) + 2
        assert roc_auc(y, q) == roc_auc(y, p)
        assert average_precision(y, q) == average_precision(y, p)


def test_stratified_folds():
    y = np.array([1, 1] + [0] * 8)
    folds = stratified_folds(y, 2, seed=3)
    for f in folds:
        assert y[f].sum() == 1 and len(f) - y[f].sum() == 4
    assert all(np.array_equal(a, b) for a, b in zip(folds, stratified_folds(y, 2, seed=3)))
    with pytest.raises(FoldError):
        stratified_folds(y, 3)


@given(st.integers(0, 10**6), st.integers(2, 6), st.integers(6, 40), st.integers(6, 40))
def test_fold_partition(seed, k, n0, n1):
    y = np.array([0] * n0 + [1] * n1)
    folds = stratified_folds(y, k, seed)
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(len(y)))
    for c in (0, 1):
        counts = [np.sum(y[f] == c) for f in folds]
        assert max(counts) - min(counts) <= 1


def _separable(seed, n=80):
    r = np.random.default_rng(seed)
    x = r.normal(size=(n, 3))
    y = (x[:, 0] > 0).astype(int)
    x[:, 0] += np.where(y == 1, 1.0, -1.0)
    return x, y


def test_random_search_behaviour():
    x, y = _separable(0)
    one = random_search("gnb", x, y, n_iter=1, seed=5)
    assert len(one.candidates) == 1 and one.best_params == one.candidates[0][0]
    res = random_search("logreg_l1", x, y, n_iter=6, seed=5)
    assert res.best_score == max(s for _, s in res.candidates)
    again = random_search("logreg_l1", x, y, n_iter=6, seed=5, n_threads=3)
    assert again.best_params == res.best_params and again.best_score == res.best_score
    with pytest.raises(ValueError):
        random_search("gnb", x, y, n_iter=0)


def test_cross_validate_shape_and_bookkeeping():
    x, y = _separable(1)
    r = cross_validate(["logreg_l1"], x, y, k=2, seed=2, tuning_enabled=False)
    cand = r.results["logreg_l1"]
    assert len(cand.folds) == 2
    for rec in cand.folds:
        redo = compute_metrics(rec.y, rec.p, cand.threshold_trace.applied[rec.fold])
        assert redo == rec.metrics
        assert np.array_equal(rec.y, y[r.fold_indices[rec.fold]])
    assert abs(r.grand_average("logreg_l1") - np.mean([f.metrics.grand_score for f in cand.folds])) < 1e-15


def test_separable_folds_have_perfect_auc():
    x, y = _separable(2, n=100)
    x[:, 0] = np.where(y == 1, 2.0, -2.0) + 0.1 * x[:, 1]
    r = cross_validate(["logreg_l1"], x, y, k=5, seed=0, tuning_enabled=False)
    assert all(f.metrics.auc == 1.0 for f in r.results["logreg_l1"].folds)


def _fake(name, m):
    from mait.eval.metrics import MetricSet

    ms = MetricSet(m[1], m[2], m[0], 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0.5)
    return CandidateResult(name, [FoldRecord(0, np.array([0]), np.array([0]), np.array([0.0]), {}, ms)])


def test_select_best():
    a, b = _fake("A", (0.5, 0.8, 0.7)), _fake("B", (0.4, 0.9, 0.6))
    assert abs(a.grand_average - 2 / 3) < 1e-12 and abs(b.grand_average - 0.6333333333333333) < 1e-12
    assert select_best(CVResult(["A", "B"], [], {"A": a, "B": b})) == "A"
    assert select_best(CVResult(["B"], [], {"B": b})) == "B"
    c = _fake("C", (0.5, 0.8, 0.7))
    assert select_best(CVResult(["C", "A"], [], {"A": a, "C": c})) == "C"


def test_threshold_trace():
    folds = [([0, 1], [0.1, 0.5]), ([0, 1], [0.2, 0.6]), ([0, 1], [0.15, 0.55])]
    t = tune_threshold(folds, 0.2)
    assert np.allclose(t.estimates, [0.3, 0.4, 0.35])
    assert abs(t.final - 0.35) < 1e-12
    assert t.applied[0] == 0.2 and abs(t.applied[1] - 0.3) < 1e-12 and abs(t.applied[2] - 0.35) < 1e-12
    sym = tune_threshold([([0, 0, 1, 1], [0.2, 0.3, 0.7, 0.8])] * 3, 0.2)
    assert all(e == 0.5 for e in sym.estimates)
    skip = tune_threshold([([1, 1], [0.4, 0.6]), ([0, 1], [0.2, 0.6])], 0.1)
    assert math.isnan(skip.estimates[0]) and skip.applied == [0.1, 0.1] and abs(skip.final - 0.4) < 1e-12


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=8))
def test_threshold_final_within_estimates(means):
    folds = [([0, 1], [a, b]) for a, b in means]
    t = tune_threshold(folds, 0.3)
    assert min(t.estimates) - 1e-12 <= t.final <= max(t.estimates) + 1e-12


def test_pava_examples_and_oracle():
    assert np.array_equal(pava([1.0, 0.0]), [0.5, 0.5])
    assert np.array_equal(pava([0.0, 0.25, 1.0]), [0.0, 0.25, 1.0])
    r = np.random.default_rng(0)
    for _ in range(20):
        y = r.integers(0, 2, 25).astype(float)
        expect = IsotonicRegression().fit_transform(np.arange(25), y)
        got = pava(y)
        assert np.max(np.abs(got - expect)) < 1e-12
        assert np.all(np.diff(got) >= 0) and abs(got.mean() - y.mean()) < 1e-12


def test_isotonic_calibrator():
    r = np.random.default_rng(1)
    p = r.uniform(size=200)
    y = (r.uniform(size=200) < p**2).astype(int)
    cal = isotonic_calibrate(p, y)
    q = cal.predict(p)
    assert np.mean((q - y) ** 2) <= np.mean((p - y) ** 2)
    grid = np.linspace(-0.5, 1.5, 50)
    assert np.all(np.diff(cal.predict(grid)) >= 0)
    with pytest.raises(CalibrationError):
        isotonic_calibrate([0.3], [1])


def test_conformal_examples():
    assert conformal_quantile([0.1, 0.2, 0.3, 0.9], 0.25) == 0.9
    assert conformal_quantile([0.1, 0.2, 0.3, 0.9], 0.01) == 1.0
    sets = conformal_set([0.9, 0.8], 1e-6, [0.3, 0.99])
    assert sets.all()
    with pytest.raises(ConformalError):
        conformal_quantile([], 0.1)


def test_conformal_set_size_monotone_in_alpha():
    r = np.random.default_rng(2)
    cal = r.uniform(size=50)
    new = r.uniform(size=30)
    sizes = [conformal_set(cal, a, new).sum() for a in (0.05, 0.1, 0.2, 0.4, 0.7)]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_conformal_coverage_simulation():
    alpha, covered = 0.1, []
    for s in range(10):
        r = np.random.default_rng(s)
        p = r.uniform(size=1000)
        y = (r.uniform(size=1000) < p).astype(int)
        c = SplitConformalClassifier(alpha).fit(p[:500], y[:500])
        covered.append(coverage(c.predict_set(p[500:]), y[500:]))
    # binomial noise on 500 test rows: sd about 0.013
    assert min(covered) >= 1 - alpha - 3 * math.sqrt(alpha * (1 - alpha) / 500)
    assert np.mean(covered) >= 1 - alpha - 0.01


def test_net_benefit_examples():
    y = np.array([1] * 20 + [0] * 80)
    p = np.r_[np.ones(15), np.zeros(5), np.ones(10), np.zeros(70)]
    c = net_benefit_curve(y, p, [0.1, 0.2])
    assert abs(c.model[0] - (0.15 - 0.10 / 9)) < 1e-12
    assert abs(c.treat_all[1]) < 1e-12
    assert np.all(c.treat_none == 0)
    r = np.random.default_rng(0)
    q = r.uniform(size=100)
    c0 = net_benefit_curve(y, q, harm_weight=0.0)
    assert np.all(np.diff(c0.model) <= 0) and np.all(c0.model <= y.mean())
    c1 = net_benefit_curve(y, q)
    assert np.all(c1.model <= y.mean() + 1e-15)
    with pytest.raises(ValueError):
        net_benefit_curve(y, q, [0.0, 0.5])


def test_uncertainty_filter():
    p = np.array([0.99, 0.5, 0.55, 0.2])
    s = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 2.0], [0.0, 0.0]])
    r = uncertainty_filter(p, s)
    assert list(r.discarded) == [1] and 0 in r.kept and 1 in r.reasons
    assert list(uncertainty_filter(np.array([0.52, 0.5]), np.zeros((2, 2)), prob_band=0).discarded) == [1]
    assert 3 in uncertainty_filter(p, s, combine="or").discarded
