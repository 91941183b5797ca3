"""Permutation importance, pairwise interactions, attribution significance and unified importance."""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .._utils import derive_rng, parallel_map, percentile_interval
from ..eval.metrics import compute_metrics, roc_auc
from ..models.zoo import predict_proba


def _scorer(metric, threshold=0.5):
    if metric == "auc":
        return lambda y, p: roc_auc(y, p)
    if metric == "mcc":
        return lambda y, p: compute_metrics(y, p, threshold).mcc
    raise ValueError(f"unknown metric {metric!r}; use 'auc' or 'mcc'")


@dataclass
class PermutationImportance:
    feature_names: list
    importance: np.ndarray
    sd: np.ndarray
    baseline: float


def permutation_importance(model, x, y, metric="auc", n_repeats=10, seed=0, threshold=0.5, n_threads=1, feature_names=None, predict=None):
    """Baseline metric minus the metric after shuffling one column, averaged over repeats."""
    x = np.asarray(x, dtype=float)
    predict = predict or (lambda m: predict_proba(model, m))
    score = _scorer(metric, threshold)
    base = score(y, predict(x))

    def one(j):
        drops = np.empty(n_repeats)
        for r in range(n_repeats):
            perm = derive_rng(seed, "permutation", j, r).permutation(len(x))
            xp = x.copy()
            xp[:, j] = x[perm, j]
            drops[r] = base - score(y, predict(xp))
        return drops

    drops = np.array(parallel_map(one, range(x.shape[1]), n_threads))
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(x.shape[1])]
    sd = drops.std(axis=1, ddof=1) if n_repeats > 1 else np.zeros(len(drops))
    return PermutationImportance(names, drops.mean(axis=1), sd, float(base))


@dataclass
class PairInteractions:
    pairs: list
    score: np.ndarray
    se: np.ndarray

    def top(self):
        return self.pairs[int(np.argmax(self.score))]


def pair_interactions(model, x, y, metric="auc", n_repeats=10, seed=0, threshold=0.5, n_threads=1, predict=None):
    """Joint-permutation drop of each pair minus the two single-feature drops.

    Within a repeat one shared row permutation is used for the single and
    joint shuffles, so purely additive models give near-zero scores.
    """
    x = np.asarray(x, dtype=float)
    predict = predict or (lambda m: predict_proba(model, m))
    score = _scorer(metric, threshold)
    base = score(y, predict(x))
    D = x.shape[1]
    pairs = list(combinations(range(D), 2))

    def one(r):
        perm = derive_rng(seed, "pair", r).permutation(len(x))
        single = np.empty(D)
        for j in range(D):
            xp = x.copy()
            xp[:, j] = x[perm, j]
            single[j] = base - score(y, predict(xp))
        out = np.empty(len(pairs))
        for k, (i, j) in enumerate(pairs):
            xp = x.copy()
            xp[:, [i, j]] = x[perm][:, [i, j]]
            out[k] = base - score(y, predict(xp)) - single[i] - single[j]
        return out

    vals = np.array(parallel_map(one, range(n_repeats), n_threads))
    se = vals.std(axis=0, ddof=1) / np.sqrt(n_repeats) if n_repeats > 1 else np.zeros(len(pairs))
    return PairInteractions(pairs, vals.mean(axis=0), se)


@dataclass
class SignificanceResult:
    feature_names: list
    tau: float
    crossing_fraction: np.ndarray
    median_abs: np.ndarray
    significant: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    n_bootstrap: int
    confidence: float = 0.95


def shap_significance(values, n_bootstrap=200, seed=0, confidence=0.95, feature_names=None, n_threads=1):
    """Bootstrap test of whether a feature's |attribution| sits clearly above the global mean.

    tau is the mean |attribution| over all rows and features.  A resample
    "crosses" for feature j when tau lies inside the interquartile range of
    its |attribution|.  Significant: crossing fraction < 1 - confidence and
    full-data median |attribution| > tau.  Also reports percentile intervals
    for the mean |attribution|.
    """
    if n_bootstrap < 20:
        raise ValueError("n_bootstrap must be at least 20")
    names = feature_names
    if hasattr(values, "values"):
        names = names or values.feature_names
        values = values.values
    a = np.abs(np.asarray(values, dtype=float))
    n, D = a.shape
    tau = float(a.mean())

    def one(b):
        idx = derive_rng(seed, "significance", b).integers(0, n, n)
        s = a[idx]
        q25 = np.quantile(s, 0.25, axis=0, method="linear")
        q75 = np.quantile(s, 0.75, axis=0, method="linear")
        return (q25 <= tau) & (tau <= q75), s.mean(axis=0)

    res = parallel_map(one, range(n_bootstrap), n_threads)
    crossing = np.mean([c for c, _ in res], axis=0)
    means = np.array([m for _, m in res])
    ci = np.array([percentile_interval(means[:, j], confidence) for j in range(D)])
    median = np.median(a, axis=0)
    significant = (crossing < 1.0 - confidence) & (median > tau)
    names = list(names) if names is not None else [f"x{j}" for j in range(D)]
    return SignificanceResult(names, tau, crossing, median, significant, ci[:, 0], ci[:, 1], n_bootstrap, confidence)


def correct_only_importance(values, y, p, threshold=0.5):
    """Mean |attribution| over rows whose thresholded prediction matches y; None when no row does."""
    values = values.values if hasattr(values, "values") else np.asarray(values, dtype=float)
    correct = (np.asarray(p, dtype=float) >= threshold).astype(int) == np.asarray(y).astype(int)
    if not correct.any():
        return None
    return np.abs(values[correct]).mean(axis=0)


@dataclass
class ImportanceTable:
    feature_names: list
    raw: dict
    normalized: dict
    unified: np.ndarray
    rank: np.ndarray
    flags: list = field(default_factory=list)

    def ordered(self):
        return sorted(range(len(self.feature_names)), key=lambda j: self.rank[j])


def unify_importance(methods, feature_names):
    """Min-max normalise each method's scores and average them.

    ``methods`` maps a method name to a score vector aligned with
    ``feature_names``.  Constant vectors normalise to zeros and are flagged.
    Rank 1 is the highest unified score; ties break by feature name.
    """
    if not methods:
        raise ValueError("at least one importance method is required")
    D = len(feature_names)
    raw, normalized, flags = {}, {}, []
    for name, scores in methods.items():
        s = np.asarray(scores, dtype=float)
        if s.shape != (D,):
            raise ValueError(f"method {name!r} has {s.size} scores for {D} features")
        lo, hi = s.min(), s.max()
        if hi > lo:
            normalized[name] = (s - lo) / (hi - lo)
        else:
            normalized[name] = np.zeros(D)
            flags.append(f"CONSTANT:{name}")
        raw[name] = s
    unified = np.mean([normalized[m] for m in normalized], axis=0)
    order = sorted(range(D), key=lambda j: (-unified[j], feature_names[j]))
    rank = np.empty(D, dtype=int)
    rank[order] = np.arange(1, D + 1)
    return ImportanceTable(list(feature_names), raw, normalized, unified, rank, flags)
