"""Shapley attribution engines: exact path-dependent TreeSHAP, linear SHAP and Monte-Carlo sampling."""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .._utils import derive_rng, parallel_map
from ..exceptions import AttributionError


@dataclass
class ShapMatrix:
    """Per-row attributions with ``base_value + values.sum(1) == margin``.

    ``scale`` names the output being decomposed: ``margin`` (log-odds or
    regression value) or ``probability``.  ``se`` holds Monte-Carlo standard
    errors for sampled engines and is ``None`` for exact ones.
    """

    values: np.ndarray
    base_value: float
    feature_names: list
    scale: str = "margin"
    se: np.ndarray = None

    def total(self):
        return self.base_value + self.values.sum(axis=1)

    def mean_abs(self):
        return np.abs(self.values).mean(axis=0)

    def grouped(self, sep="="):
        """Sum columns named ``col=cat`` into their source column."""
        groups = {}
        for j, name in enumerate(self.feature_names):
            groups.setdefault(name.split(sep, 1)[0], []).append(j)
        names = list(groups)
        vals = np.column_stack([self.values[:, groups[g]].sum(axis=1) for g in names])
        return ShapMatrix(vals, self.base_value, names, self.scale)


# -- exact TreeSHAP ---------------------------------------------------------
# Path elements live in flat buffers; a recursion level at unique depth d
# owns the slice starting at ``offset``, the next level starts at offset+d+1.


@njit(nogil=True, cache=True)
def _extend(pf, pz, po, pw, off, depth, zero, one, feat):
    pf[off + depth] = feat
    pz[off + depth] = zero
    po[off + depth] = one
    pw[off + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[off + i + 1] += one * pw[off + i] * (i + 1) / (depth + 1)
        pw[off + i] = zero * pw[off + i] * (depth - i) / (depth + 1)


@njit(nogil=True, cache=True)
def _unwind(pf, pz, po, pw, off, depth, idx):
    one = po[off + idx]
    zero = pz[off + idx]
    nxt = pw[off + depth]
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = pw[off + i]
            pw[off + i] = nxt * (depth + 1) / ((i + 1) * one)
            nxt = tmp - pw[off + i] * zero * (depth - i) / (depth + 1)
        else:
            pw[off + i] = pw[off + i] * (depth + 1) / (zero * (depth - i))
    for i in range(idx, depth):
        pf[off + i] = pf[off + i + 1]
        pz[off + i] = pz[off + i + 1]
        po[off + i] = po[off + i + 1]


@njit(nogil=True, cache=True)
def _unwound_sum(pz, po, pw, off, depth, idx):
    one = po[off + idx]
    zero = pz[off + idx]
    nxt = pw[off + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = nxt * (depth + 1) / ((i + 1) * one)
            total += tmp
            nxt = pw[off + i] - tmp * zero * (depth - i) / (depth + 1)
        elif zero != 0.0:
            total += (pw[off + i] / zero) / ((depth - i) / (depth + 1))
    return total


# recursive kernels are not cached: numba's on-disk cache does not handle
# self-recursion reliably
@njit(nogil=True)
def _recurse(feature, threshold, left, right, value, cover, missing_left, x, phi, pf, pz, po, pw,
             node, depth, parent_off, zero, one, feat):
    off = parent_off + depth + 1 if depth > 0 else parent_off
    if depth > 0:
        for i in range(depth):
            pf[off + i] = pf[parent_off + i]
            pz[off + i] = pz[parent_off + i]
            po[off + i] = po[parent_off + i]
            pw[off + i] = pw[parent_off + i]
    _extend(pf, pz, po, pw, off, depth, zero, one, feat)
    f = feature[node]
    if f < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(pz, po, pw, off, depth, i)
            phi[pf[off + i]] += w * (po[off + i] - pz[off + i]) * value[node]
        return
    v = x[f]
    if np.isnan(v):
        go_left = missing_left[node]
    else:
        go_left = v <= threshold[node]
    hot = left[node] if go_left else right[node]
    cold = right[node] if go_left else left[node]
    w = cover[node]
    hot_zero = cover[hot] / w
    cold_zero = cover[cold] / w
    in_zero = 1.0
    in_one = 1.0
    k = 0
    while k <= depth:
        if pf[off + k] == f:
            break
        k += 1
    if k != depth + 1:
        in_zero = pz[off + k]
        in_one = po[off + k]
        _unwind(pf, pz, po, pw, off, depth, k)
        depth -= 1
    _recurse(feature, threshold, left, right, value, cover, missing_left, x, phi, pf, pz, po, pw,
             hot, depth + 1, off, hot_zero * in_zero, in_one, f)
    _recurse(feature, threshold, left, right, value, cover, missing_left, x, phi, pf, pz, po, pw,
             cold, depth + 1, off, cold_zero * in_zero, 0.0, f)


@njit(nogil=True)
def _tree_shap_rows(feature, threshold, left, right, value, cover, missing_left, X, max_depth, out):
    size = (max_depth + 2) * (max_depth + 3) // 2 + max_depth + 2
    pf = np.zeros(size, dtype=np.int64)
    pz = np.zeros(size)
    po = np.zeros(size)
    pw = np.zeros(size)
    D = X.shape[1]
    phi = np.zeros(D + 1)
    for r in range(X.shape[0]):
        phi[:] = 0.0
        _recurse(feature, threshold, left, right, value, cover, missing_left, X[r], phi, pf, pz, po, pw,
                 0, 0, 0, 1.0, 1.0, D)
        for j in range(D):
            out[r, j] += phi[j]


def expected_value(tree):
    """Cover-weighted mean leaf value."""
    leaves = tree.feature < 0
    return float(np.sum(tree.value[leaves] * tree.cover[leaves]) / tree.cover[0])


def tree_shap_single(tree, X):
    """Exact path-dependent Shapley values of one tree (rows x features)."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if tree.cover is None or not np.all(tree.cover > 0):
        raise AttributionError("tree nodes need positive training covers")
    out = np.zeros(X.shape)
    # the "feature" of the root path element is the dummy index D
    _tree_shap_rows(tree.feature, tree.threshold, tree.left, tree.right, tree.value, tree.cover,
                    tree.missing_left, X, tree.depth(), out)
    return out


def _ensemble(model):
    """Trees, per-tree scaling and additive offset of a fitted tree model."""
    trees = getattr(model, "trees_", None)
    if trees is None:
        raise AttributionError(f"{type(model).__name__} exposes no tree structure")
    if hasattr(model, "init_score_"):
        return trees, 1.0, model.init_score_
    return trees, 1.0 / len(trees), 0.0


def tree_shap(model, X, feature_names=None, n_threads=1):
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    trees, scale, offset = _ensemble(model)
    parts = parallel_map(lambda t: tree_shap_single(t, X), trees, n_threads)
    values = scale * np.sum(parts, axis=0)
    base = offset + scale * sum(expected_value(t) for t in trees)
    names = _names(model, feature_names, X.shape[1])
    return ShapMatrix(values, float(base), names, getattr(model, "margin_scale", "margin"))


def _names(model, feature_names, D):
    if feature_names is not None:
        return list(feature_names)
    names = getattr(model, "feature_names_", None)
    return list(names) if names is not None else [f"x{j}" for j in range(D)]


def linear_shap(model, X, background_means, feature_names=None):
    """phi_j = w_j (x_j - mu_j) under feature independence; base = w.mu + b."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mu = np.asarray(background_means, dtype=float)
    w = np.asarray(model.coef_, dtype=float)
    values = w * (X - mu)
    base = float(w @ mu + model.intercept_)
    return ShapMatrix(values, base, _names(model, feature_names, X.shape[1]), getattr(model, "margin_scale", "margin"))


def mc_shapley(model, X, background, n_orderings=100, seed=0, n_threads=1, feature_names=None):
    """Permutation-sampling Shapley values of ``model.predict_margin``.

    Each sampled ordering switches features from the background to the
    explained row one at a time, averaging the margin over all background
    rows at every step.  Every ordering therefore telescopes from the mean
    background margin to the row's margin, so efficiency holds exactly;
    sampling only affects how the total is shared.  Standard errors are per
    cell.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    background = np.asarray(background, dtype=float)
    if len(background) < 10:
        raise AttributionError("at least 10 background rows are required")
    n, D = X.shape
    B = len(background)

    def one(r):
        rng = derive_rng(seed, "mc_shapley", r)
        contrib = np.empty((n_orderings, D))
        for p in range(n_orderings):
            order = rng.permutation(D)
            path = np.repeat(background[None, :, :], D + 1, axis=0)
            for k, j in enumerate(order):
                path[k + 1:, :, j] = X[r, j]
            out = model.predict_margin(path.reshape(-1, D)).reshape(D + 1, B).mean(axis=1)
            contrib[p, order] = np.diff(out)
        se = contrib.std(axis=0, ddof=1) / np.sqrt(n_orderings) if n_orderings > 1 else np.zeros(D)
        return contrib.mean(axis=0), se

    res = parallel_map(one, range(n), n_threads)
    values = np.stack([m for m, _ in res])
    se = np.stack([s for _, s in res])
    base = float(np.mean(model.predict_margin(background)))
    return ShapMatrix(values, base, _names(model, feature_names, D), getattr(model, "margin_scale", "margin"), se)


def explain_model(model, X, background, n_orderings=100, seed=0, n_threads=1, feature_names=None):
    """Pick the exact engine when one applies, otherwise fall back to sampling."""
    if hasattr(model, "trees_"):
        return tree_shap(model, X, feature_names, n_threads)
    if hasattr(model, "coef_") and hasattr(model, "intercept_"):
        return linear_shap(model, X, np.mean(background, axis=0), feature_names)
    return mc_shapley(model, X, background, n_orderings, seed, n_threads, feature_names)
