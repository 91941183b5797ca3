"""Stratified folds, nested random search, cross-validation and model selection."""

from dataclasses import dataclass, field

import numpy as np

from .._utils import derive_rng, derive_seed, parallel_map
from ..exceptions import FoldError
from ..models.zoo import (
    DEFAULTS,
    ModelSpec,
    class_weights,
    fit_classifier,
    predict_proba,
    sample_hyperparameters,
)
from ..preprocess import random_oversample
from .metrics import average_precision, compute_metrics, roc_auc
from .threshold import minority_fraction, tune_threshold

OBJECTIVES = {"auc": roc_auc, "pr_auc": average_precision}


def stratified_folds(y, k, seed=0):
    """k disjoint index arrays; each class is shuffled then dealt round-robin.

    Dealing continues from where the previous class stopped so fold sizes
    stay balanced overall as well as per class.
    """
    y = np.asarray(y).astype(int)
    if k < 2:
        raise FoldError("need at least two folds")
    folds = [[] for _ in range(k)]
    offset = 0
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            raise FoldError(f"class {cls} has {len(members)} rows, fewer than k={k}")
        members = members[derive_rng(seed, "folds", cls).permutation(len(members))]
        for i, r in enumerate(members):
            folds[(offset + i) % k].append(int(r))
        offset = (offset + len(members)) % k
    return [np.sort(np.asarray(f, dtype=int)) for f in folds]


def _train_weights(y, weights, rows):
    if weights is None:
        return class_weights(y[rows]).sample_weights(y[rows])
    return np.asarray(weights, dtype=float)[rows]


@dataclass
class SearchResult:
    best_params: dict
    best_score: float
    candidates: list


def random_search(
    spec_family,
    x,
    y,
    weights=None,
    n_iter=25,
    inner_k=3,
    objective="auc",
    seed=0,
    n_threads=1,
):
    """Seeded random search scored by mean inner-fold objective; ties keep the earliest draw.

    ``weights=None`` recomputes balanced class weights on every inner
    training part.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y).astype(int)
    score_fn = OBJECTIVES[objective]
    rng = derive_rng(seed, "search", spec_family)
    configs = [sample_hyperparameters(spec_family, rng, x.shape[0], x.shape[1]) for _ in range(n_iter)]
    folds = stratified_folds(y, inner_k, derive_seed(seed, "inner"))

    def score(item):
        i, params = item
        vals = []
        for f, test in enumerate(folds):
            train = np.setdiff1d(np.arange(len(y)), test)
            spec = ModelSpec(spec_family, params, derive_seed(seed, "model", i, f))
            model = fit_classifier(spec, x[train], y[train], _train_weights(y, weights, train))
            vals.append(score_fn(y[test], predict_proba(model, x[test])))
        return float(np.mean(vals))

    scores = parallel_map(score, list(enumerate(configs)), n_threads)
    best = int(np.argmax(scores))
    return SearchResult(configs[best], scores[best], list(zip(configs, scores)))


@dataclass
class FoldRecord:
    fold: int
    test_indices: np.ndarray
    y: np.ndarray
    p: np.ndarray
    params: dict
    metrics: object = None


@dataclass
class CandidateResult:
    algorithm: str
    folds: list = field(default_factory=list)
    threshold_trace: object = None

    @property
    def grand_average(self):
        return float(np.mean([f.metrics.grand_score for f in self.folds]))

    def metric_mean(self, name):
        return float(np.mean([getattr(f.metrics, name) for f in self.folds]))

    def metric_std(self, name):
        return float(np.std([getattr(f.metrics, name) for f in self.folds], ddof=1))


@dataclass
class CVResult:
    candidates: list
    fold_indices: list
    results: dict

    def grand_average(self, algorithm):
        return self.results[algorithm].grand_average


def cross_validate(
    candidates,
    x,
    y,
    k=5,
    n_iter=25,
    seed=0,
    tuning_enabled=True,
    inner_k=3,
    objective="auc",
    threshold_tuning=True,
    initial_threshold=None,
    oversample=False,
    n_threads=1,
    feature_names=None,
    class_weighting=True,
):
    """Outer stratified CV over candidate algorithms with optional nested tuning.

    Each outer fold tunes (if enabled), computes class weights and fits on
    its own training part only. Fold metrics use that fold's applied
    threshold from :func:`tune_threshold` (0.5 everywhere when threshold
    tuning is off).  ``class_weighting=False`` fits with unit row weights.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y).astype(int)
    folds = stratified_folds(y, k, seed)
    if initial_threshold is None:
        initial_threshold = minority_fraction(y)
    results = {}
    for algorithm in candidates:
        cand = CandidateResult(algorithm)

        def run_fold(f):
            test = folds[f]
            train = np.setdiff1d(np.arange(len(y)), test)
            xt, yt = x[train], y[train]
            if oversample:
                xt, yt, _ = random_oversample(xt, yt, derive_seed(seed, "oversample", f))
            weights = class_weights(yt).sample_weights(yt) if class_weighting else np.ones(len(yt))
            if tuning_enabled:
                params = random_search(
                    algorithm, xt, yt, None if class_weighting else weights, n_iter, inner_k, objective, derive_seed(seed, "tune", algorithm, f)
                ).best_params
            else:
                params = dict(DEFAULTS[algorithm])
            spec = ModelSpec(algorithm, params, derive_seed(seed, "fit", algorithm, f))
            model = fit_classifier(spec, xt, yt, weights, feature_names)
            return FoldRecord(f, test, y[test], predict_proba(model, x[test]), spec.hyperparameters)

        cand.folds = parallel_map(run_fold, range(k), n_threads)
        if threshold_tuning:
            trace = tune_threshold([(r.y, r.p) for r in cand.folds], initial_threshold)
        else:
            trace = tune_threshold([], 0.5)
            trace.applied = [0.5] * k
            trace.estimates = [float("nan")] * k
        cand.threshold_trace = trace
        for rec in cand.folds:
            rec.metrics = compute_metrics(rec.y, rec.p, trace.applied[rec.fold])
        results[algorithm] = cand
    return CVResult(list(candidates), folds, results)


def select_best(r):
    """Highest grand average of (MCC + AUC + PR-AUC) / 3; ties follow declared order."""
    best, best_score = None, -np.inf
    for algorithm in r.candidates:
        score = r.grand_average(algorithm)
        if score > best_score:
            best, best_score = algorithm, score
    return best
