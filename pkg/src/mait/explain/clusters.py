"""k-means clustering of attribution rows with silhouette-based choice of k."""

from dataclasses import dataclass, field

import numpy as np

from .._utils import derive_rng
from ..eval.metrics import compute_metrics


def _sq_dists(X, C):
    return np.maximum(((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2), 0.0)


def kmeans_pp_init(X, k, rng):
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def lloyd(X, centers, max_iter=300, tol=1e-6):
    k = len(centers)
    for _ in range(max_iter):
        d = _sq_dists(X, centers)
        labels = d.argmin(axis=1)
        new = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new[c] = X[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its centre
                far = int(d[np.arange(len(X)), labels].argmax())
                new[c] = X[far]
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < tol:
            break
    d = _sq_dists(X, centers)
    labels = d.argmin(axis=1)
    return labels, centers, float(d[np.arange(len(X)), labels].sum())


def kmeans(X, k, seed=0, n_restarts=10, max_iter=300, tol=1e-6):
    """Best-inertia Lloyd run over ``n_restarts`` k-means++ initialisations."""
    X = np.asarray(X, dtype=float)
    best = None
    for r in range(n_restarts):
        rng = derive_rng(seed, "kmeans", k, r)
        labels, centers, inertia = lloyd(X, kmeans_pp_init(X, k, rng), max_iter, tol)
        if best is None or inertia < best[2] - 1e-12 * max(1.0, abs(best[2])):
            best = (labels, centers, inertia)
    return best


def silhouette(X, labels):
    """Mean silhouette with Euclidean distances; singleton clusters score 0."""
    X = np.asarray(X, dtype=float)
    D = np.sqrt(np.maximum(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2), 0.0))
    ks = np.unique(labels)
    if len(ks) < 2:
        return float("nan")
    s = np.zeros(len(X))
    for i in range(len(X)):
        own = labels == labels[i]
        n_own = own.sum()
        if n_own == 1:
            continue
        a = D[i, own].sum() / (n_own - 1)
        b = min(D[i, labels == c].mean() for c in ks if c != labels[i])
        m = max(a, b)
        s[i] = (b - a) / m if m > 0 else 0.0
    return float(s.mean())


@dataclass
class ClusterResult:
    labels: np.ndarray
    k: int
    silhouettes: dict
    importance: np.ndarray  # k x features mean |attribution|
    metrics: list
    feature_names: list
    flags: list = field(default_factory=list)


def shap_clusters(values, y=None, p=None, threshold=0.5, k_range=range(2, 9), seed=0, feature_names=None):
    """Cluster attribution rows, choosing k by the best mean silhouette.

    Per-cluster mean |attribution| is returned and, when ``y`` and ``p`` are
    given, a metric set per cluster.
    """
    if hasattr(values, "values"):
        feature_names = feature_names or values.feature_names
        values = values.values
    X = np.asarray(values, dtype=float)
    n, D = X.shape
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(D)]
    ks = [k for k in k_range if k <= n]
    flags = []
    if len(ks) < len(list(k_range)):
        flags.append("K_RANGE_TRUNCATED")
    distinct = len(np.unique(X, axis=0))
    if distinct < 2 or not ks:
        labels = np.zeros(n, dtype=int)
        flags.append("DEGENERATE")
        chosen, sil = 1, {}
    else:
        sil, fits = {}, {}
        for k in ks:
            if k > distinct:
                continue
            labels_k, _, _ = kmeans(X, k, seed)
            fits[k] = labels_k
            sil[k] = silhouette(X, labels_k) if len(ks) > 1 else float("nan")
        if not fits:
            labels, chosen = np.zeros(n, dtype=int), 1
            flags.append("DEGENERATE")
        else:
            # NaN silhouettes only occur for a singleton range, where the choice is vacuous
            chosen = max(fits, key=lambda k: (np.nan_to_num(sil[k], nan=-np.inf), -k))
            labels = fits[chosen]
    importance = np.array([np.abs(X[labels == c]).mean(axis=0) for c in range(chosen)])
    metrics = []
    if y is not None and p is not None:
        y = np.asarray(y)
        p = np.asarray(p, dtype=float)
        metrics = [compute_metrics(y[labels == c], p[labels == c], threshold) for c in range(chosen)]
    return ClusterResult(labels, chosen, sil, importance, metrics, names, flags)
