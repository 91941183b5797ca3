"""Pre-modelling data exploration.

Missingness and variance profiles, rank and point-biserial correlation,
binned mutual information with percentile-bootstrap intervals, and an
isolation forest for outlier scores.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._utils import derive_rng, linear_quantile, parallel_map, percentile_interval
from .data import BINARY_OUTCOME, CATEGORICAL, CONTINUOUS, CONTINUOUS_OUTCOME
from .exceptions import AssociationError


@dataclass
class QualityProfile:
    per_column_missing_fraction: dict
    per_row_missing_fraction: np.ndarray
    near_constant_columns: list
    rare_categories: dict


@dataclass
class AssociationEstimate:
    estimate: float
    lower: float
    upper: float
    n_bootstrap: int
    confidence: float


@dataclass
class AssociationReport:
    spearman_names: list
    spearman: np.ndarray
    point_biserial: dict = field(default_factory=dict)
    mutual_information: dict = field(default_factory=dict)
    n_bootstrap: int = 1000
    confidence: float = 0.95


def quality_profile(t, variance_eps=1e-12, rare_min_fraction=0.05):
    n = t.row_count
    masks = {name: t.missing_mask(name) for name in t.names}
    col_frac = {name: float(m.mean()) if n else 0.0 for name, m in masks.items()}
    if masks:
        row_frac = np.mean(np.column_stack(list(masks.values())), axis=1)
    else:
        row_frac = np.zeros(n)

    near_constant = []
    for name in t.columns_of_kind(CONTINUOUS):
        obs = t.column(name)[~masks[name]]
        var = float(np.var(obs, ddof=1)) if len(obs) >= 2 else 0.0
        if var <= variance_eps:
            near_constant.append(name)

    rare = {}
    for name in t.columns_of_kind(CATEGORICAL):
        obs = [v for v in t.column(name) if v is not None]
        if not obs:
            continue
        cats, counts = np.unique(np.asarray(obs, dtype=str), return_counts=True)
        small = [str(c) for c, k in zip(cats, counts) if k / len(obs) < rare_min_fraction]
        if small:
            rare[name] = small
    return QualityProfile(col_frac, row_frac, near_constant, rare)


def midranks(x):
    """1-based ranks with ties given their average rank."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    sx = x[order]
    ranks = np.empty(len(x))
    i = 0
    n = len(x)
    while i < n:
        j = i
        while j + 1 < n and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if den == 0.0:
        return math.nan
    return float(np.dot(a, b)) / den


def spearman(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = ~(np.isnan(x) | np.isnan(y))
    if ok.sum() < 3:
        return math.nan
    return _pearson(midranks(x[ok]), midranks(y[ok]))


def spearman_matrix(t, names=None):
    """Pairwise-complete Spearman matrix over continuous and outcome columns.

    Returns ``(names, matrix)``; entries with fewer than three complete pairs
    are NaN.
    """
    if names is None:
        names = t.columns_of_kind(CONTINUOUS, BINARY_OUTCOME, CONTINUOUS_OUTCOME)
    cols = [t.column(n) for n in names]
    k = len(cols)
    mat = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            mat[i, j] = mat[j, i] = spearman(cols[i], cols[j])
    return list(names), mat


def _complete_pairs(x, y):
    y = np.asarray(y, dtype=float)
    if x.dtype == object:
        ok = np.array([v is not None for v in x]) & ~np.isnan(y)
    else:
        ok = ~(np.isnan(x) | np.isnan(y))
    return x[ok], y[ok]


def _bootstrap(stat, x, y, n_bootstrap, seed, n_threads=1):
    n = len(y)

    def one(b):
        idx = derive_rng(seed, b).integers(0, n, n)
        yb = y[idx]
        if yb.min() == yb.max():
            return math.nan
        return stat(x[idx], yb)

    vals = np.asarray(parallel_map(one, range(n_bootstrap), n_threads), dtype=float)
    return vals[~np.isnan(vals)]


def _interval(estimate, samples, confidence):
    if len(samples) == 0:
        return estimate, estimate
    lo, hi = percentile_interval(samples, confidence)
    # percentile intervals of biased statistics (plug-in MI) can exclude the point estimate
    return min(lo, estimate), max(hi, estimate)


def point_biserial(x, y, n_bootstrap=1000, confidence=0.95, seed=0, n_threads=1):
    x, y = _complete_pairs(np.asarray(x, dtype=float), y)
    if len(np.unique(y)) < 2:
        raise AssociationError("point-biserial correlation needs both outcome classes")
    est = _pearson(x, y)
    samples = _bootstrap(_pearson, x, y, n_bootstrap, seed, n_threads)
    lo, hi = _interval(est, samples, confidence)
    return AssociationEstimate(est, lo, hi, n_bootstrap, confidence)


def quantile_codes(x, bins):
    """Integer codes of ``x`` over ``bins`` quantile bins (duplicate edges merged)."""
    x = np.asarray(x, dtype=float)
    edges = np.unique(linear_quantile(x, np.arange(1, bins) / bins))
    return np.searchsorted(edges, x, side="right")


def plugin_mi(a, b):
    """Plug-in mutual information (nats) between two discrete code vectors."""
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    n = len(ai)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] / n * np.log(n * joint[nz] / (pa @ pb)[nz])))


def _mi_stat(bins, categorical):
    def stat(x, y):
        codes = x if categorical else quantile_codes(x, bins)
        return plugin_mi(codes, y)

    return stat


def mutual_information(x, y, bins=10, n_bootstrap=1000, confidence=0.95, seed=0, n_threads=1):
    x = np.asarray(x)
    categorical = x.dtype == object
    if not categorical:
        x = x.astype(float)
    x, y = _complete_pairs(x, y)
    if len(np.unique(y)) < 2:
        raise AssociationError("mutual information needs both outcome classes")
    if categorical:
        x = np.asarray(x, dtype=str)
    stat = _mi_stat(bins, categorical)
    est = stat(x, y)
    samples = _bootstrap(stat, x, y, n_bootstrap, seed, n_threads) if n_bootstrap else []
    lo, hi = _interval(est, samples, confidence)
    return AssociationEstimate(est, lo, hi, n_bootstrap, confidence)


def association_report(t, outcome, n_bootstrap=1000, confidence=0.95, bins=10, seed=0, n_threads=1):
    names, mat = spearman_matrix(t)
    y = t.column(outcome)
    report = AssociationReport(names, mat, n_bootstrap=n_bootstrap, confidence=confidence)
    for j, name in enumerate(t.names):
        kind = t.spec(name).kind
        if name == outcome or kind not in (CONTINUOUS, CATEGORICAL):
            continue
        col = t.column(name)
        if kind == CONTINUOUS:
            report.point_biserial[name] = point_biserial(
                col, y, n_bootstrap, confidence, seed + j, n_threads
            )
        report.mutual_information[name] = mutual_information(
            col, y, bins, n_bootstrap, confidence, seed + j, n_threads
        )
    return report


# isolation forest -----------------------------------------------------------


def harmonic(k):
    if k < 1:
        return 0.0
    return float(np.sum(1.0 / np.arange(1, k + 1)))


def average_path_length(n):
    """c(n): mean unsuccessful-search path length of a BST over n points."""
    if n <= 1:
        return 0.0
    return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n


class _ITree:
    __slots__ = ("feature", "threshold", "left", "right", "size")

    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.size = [], [], [], [], []

    def _add(self, size):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(size)
        return len(self.size) - 1

    def grow(self, x, rng, height_limit):
        stack = [(x, 0, self._add(len(x)))]
        while stack:
            xs, depth, node = stack.pop()
            if depth >= height_limit or len(xs) <= 1:
                continue
            lo, hi = xs.min(axis=0), xs.max(axis=0)
            candidates = np.flatnonzero(hi > lo)
            if len(candidates) == 0:
                continue
            f = int(candidates[rng.integers(len(candidates))])
            split = rng.uniform(lo[f], hi[f])
            mask = xs[:, f] < split
            left = self._add(int(mask.sum()))
            right = self._add(int((~mask).sum()))
            self.feature[node], self.threshold[node] = f, split
            self.left[node], self.right[node] = left, right
            stack.append((xs[mask], depth + 1, left))
            stack.append((xs[~mask], depth + 1, right))
        for attr in self.__slots__:
            setattr(self, attr, np.asarray(getattr(self, attr)))
        return self

    def path_length(self, x):
        node = np.zeros(len(x), dtype=int)
        depth = np.zeros(len(x))
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = x[idx, self.feature[nd]] < self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            depth[idx] += 1.0
            active = self.feature[node] >= 0
        leaf_adj = np.array([average_path_length(int(s)) for s in self.size])
        return depth + leaf_adj[node]


class IsolationForest(OutlierMixin, BaseEstimator):
    """Isolation forest with anomaly score 2^(-E[h(x)] / c(subsample)).

    Parameters
    ----------
    n_trees : int
        Number of isolation trees.
    subsample : int
        Rows drawn without replacement per tree; clamped to the row count.
    contamination : float
        Fraction flagged as outliers by :meth:`predict`.
    seed : int
        Per-tree generators are derived from ``(seed, tree index)``.
    """

    def __init__(self, n_trees=200, subsample=256, contamination=0.05, seed=0, n_jobs=1):
        self.n_trees = n_trees
        self.subsample = subsample
        self.contamination = contamination
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        n = X.shape[0]
        self.subsample_ = min(int(self.subsample), n)
        height = int(math.ceil(math.log2(max(self.subsample_, 2))))

        def grow(i):
            rng = derive_rng(self.seed, i)
            rows = rng.choice(n, self.subsample_, replace=False)
            return _ITree().grow(X[rows], rng, height)

        self.trees_ = parallel_map(grow, range(self.n_trees), self.n_jobs)
        self.n_features_in_ = X.shape[1]
        scores = self.anomaly_score(X)
        self.offset_ = float(linear_quantile(scores, 1.0 - self.contamination))
        return self

    def mean_path_length(self, X):
        check_is_fitted(self, "trees_")
        X = check_array(X, dtype=float)
        return np.mean([tree.path_length(X) for tree in self.trees_], axis=0)

    def anomaly_score(self, X):
        return 2.0 ** (-self.mean_path_length(X) / average_path_length(self.subsample_))

    def decision_function(self, X):
        return self.offset_ - self.anomaly_score(X)

    def predict(self, X):
        return np.where(self.anomaly_score(X) > self.offset_, -1, 1)


def isolation_scores(x, n_trees=200, subsample=256, seed=0, n_threads=1):
    """Per-row anomaly scores in (0, 1) for a fully observed numeric matrix."""
    forest = IsolationForest(n_trees=n_trees, subsample=subsample, seed=seed, n_jobs=n_threads)
    return forest.fit(x).anomaly_score(x)
