"""Histogram gradient-boosted trees for binary classification.

Features are pre-binned into at most 255 quantile bins with a dedicated
missing-value bin. Each boosting round grows one tree leaf-wise (best gain
first) on Newton statistics of the weighted logistic loss. Every split
learns a default direction for missing values, chosen as the side giving
the larger gain.
"""

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, ClassifierMixin

from ._base import ZooMixin, check_training_data, proba_columns, sigmoid
from ._tree import Tree

MISSING_BIN = 255
MAX_BINS = 255


def fit_bin_edges(X, max_bins=MAX_BINS):
    """Per-feature split edges; bin(x) <= b  iff  x <= edges[b]."""
    edges = []
    for j in range(X.shape[1]):
        col = X[:, j]
        distinct = np.unique(col[~np.isnan(col)])
        if len(distinct) <= max_bins:
            e = (distinct[:-1] + distinct[1:]) / 2.0
        else:
            qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
            e = np.unique(np.quantile(col[~np.isnan(col)], qs, method="linear"))
        edges.append(np.asarray(e, dtype=float))
    return edges


def bin_data(X, edges):
    binned = np.empty(X.shape, dtype=np.uint8)
    for j, e in enumerate(edges):
        col = X[:, j]
        b = np.searchsorted(e, col, side="left")
        b[np.isnan(col)] = MISSING_BIN
        binned[:, j] = b
    return np.ascontiguousarray(binned)


@njit(nogil=True, cache=True)
def _histograms(binned, grad, hess, rows, D):
    hg = np.zeros((D, 256))
    hh = np.zeros((D, 256))
    hc = np.zeros((D, 256))
    for i in range(rows.shape[0]):
        r = rows[i]
        for f in range(D):
            b = binned[r, f]
            hg[f, b] += grad[r]
            hh[f, b] += hess[r]
            hc[f, b] += 1.0
    return hg, hh, hc


@njit(nogil=True, cache=True)
def _best_split(hg, hh, hc, n_bins, l2, min_leaf, min_hess):
    """Best (gain, feature, bin, missing_left) for one node; gain -inf if none."""
    D = hg.shape[0]
    G = 0.0
    H = 0.0
    C = 0.0
    for b in range(256):
        G += hg[0, b]
        H += hh[0, b]
        C += hc[0, b]
    parent = G * G / (H + l2)
    best_gain = -np.inf
    best_f = -1
    best_b = -1
    best_ml = False
    for f in range(D):
        gm = hg[f, 255]
        hm = hh[f, 255]
        cm = hc[f, 255]
        gl = 0.0
        hl = 0.0
        cl = 0.0
        for b in range(n_bins[f]):
            gl += hg[f, b]
            hl += hh[f, b]
            cl += hc[f, b]
            for side in range(2):
                ml = side == 1
                if ml:
                    GL = gl + gm
                    HL = hl + hm
                    CL = cl + cm
                else:
                    GL = gl
                    HL = hl
                    CL = cl
                GR = G - GL
                HR = H - HL
                CR = C - CL
                if CL < min_leaf or CR < min_leaf or HL < min_hess or HR < min_hess:
                    continue
                gain = GL * GL / (HL + l2) + GR * GR / (HR + l2) - parent
                if gain > best_gain + 1e-12 * max(1.0, abs(best_gain)) or best_f < 0:
                    best_gain = gain
                    best_f = f
                    best_b = b
                    best_ml = ml
                    if cm == 0.0:
                        best_ml = HL >= HR
    return best_gain, best_f, best_b, best_ml


@njit(nogil=True, cache=True)
def _grow_leafwise(binned, grad, hess, n_bins, max_leaves, min_leaf, l2, min_hess):
    n, D = binned.shape
    cap = 2 * max_leaves + 1
    feature = -np.ones(cap, dtype=np.int64)
    bin_thr = np.zeros(cap, dtype=np.int64)
    left = -np.ones(cap, dtype=np.int64)
    right = -np.ones(cap, dtype=np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)
    gain = np.zeros(cap)
    missing_left = np.zeros(cap, dtype=np.bool_)

    node_of_row = np.zeros(n, dtype=np.int64)
    rows_all = np.arange(n)

    # candidate info per node
    cand_gain = np.full(cap, -np.inf)
    cand_f = -np.ones(cap, dtype=np.int64)
    cand_b = -np.ones(cap, dtype=np.int64)
    cand_ml = np.zeros(cap, dtype=np.bool_)
    is_open = np.zeros(cap, dtype=np.bool_)

    G = grad.sum()
    H = hess.sum()
    value[0] = -G / (H + l2)
    cover[0] = n
    hg, hh, hc = _histograms(binned, grad, hess, rows_all, D)
    g0, f0, b0, m0 = _best_split(hg, hh, hc, n_bins, l2, min_leaf, min_hess)
    cand_gain[0] = g0
    cand_f[0] = f0
    cand_b[0] = b0
    cand_ml[0] = m0
    is_open[0] = True
    n_nodes = 1
    n_leaves = 1

    while n_leaves < max_leaves:
        best = -1
        bg = 0.0
        for i in range(n_nodes):
            if is_open[i] and cand_f[i] >= 0 and cand_gain[i] > 1e-12:
                if best < 0 or cand_gain[i] > bg:
                    best = i
                    bg = cand_gain[i]
        if best < 0:
            break
        f = cand_f[best]
        b = cand_b[best]
        ml = cand_ml[best]
        ln = n_nodes
        rn = n_nodes + 1
        n_nodes += 2
        feature[best] = f
        bin_thr[best] = b
        missing_left[best] = ml
        left[best] = ln
        right[best] = rn
        gain[best] = cand_gain[best]
        is_open[best] = False
        n_leaves += 1

        nl = 0
        nr = 0
        for r in range(n):
            if node_of_row[r] == best:
                v = binned[r, f]
                go_left = ml if v == 255 else v <= b
                if go_left:
                    node_of_row[r] = ln
                    nl += 1
                else:
                    node_of_row[r] = rn
                    nr += 1
        lrows = np.empty(nl, dtype=np.int64)
        rrows = np.empty(nr, dtype=np.int64)
        il = 0
        ir = 0
        for r in range(n):
            if node_of_row[r] == ln:
                lrows[il] = r
                il += 1
            elif node_of_row[r] == rn:
                rrows[ir] = r
                ir += 1
        for child, crow in ((ln, lrows), (rn, rrows)):
            gs = 0.0
            hs = 0.0
            for i in range(crow.shape[0]):
                gs += grad[crow[i]]
                hs += hess[crow[i]]
            value[child] = -gs / (hs + l2)
            cover[child] = crow.shape[0]
            is_open[child] = True
            if crow.shape[0] >= 2 * min_leaf:
                hg, hh, hc = _histograms(binned, grad, hess, crow, D)
                cg, cf, cb, cm = _best_split(hg, hh, hc, n_bins, l2, min_leaf, min_hess)
                cand_gain[child] = cg
                cand_f[child] = cf
                cand_b[child] = cb
                cand_ml[child] = cm

    return (
        feature[:n_nodes],
        bin_thr[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        cover[:n_nodes],
        missing_left[:n_nodes],
        gain[:n_nodes],
        node_of_row,
    )


def weighted_log_loss(y, raw, w):
    # log(1 + e^raw) - y * raw, stable
    return float(np.sum(w * (np.logaddexp(0.0, raw) - y * raw)) / np.sum(w))


class HistGradientBoostingClassifier(ClassifierMixin, ZooMixin, BaseEstimator):
    """Leaf-wise histogram gradient boosting on the logistic loss.

    Parameters
    ----------
    learning_rate : float
        Shrinkage applied to every leaf value.
    max_leaves : int
        Leaves per tree.
    n_iter : int
        Boosting rounds; 0 leaves the model at the initial log-odds.
    l2 : float
        L2 regularisation of leaf values.
    min_leaf : int
        Minimum training rows per leaf.
    """

    margin_scale = "margin"

    def __init__(self, learning_rate=0.1, max_leaves=31, n_iter=100, l2=1.0, min_leaf=10, seed=0, n_jobs=1):
        self.learning_rate = learning_rate
        self.max_leaves = max_leaves
        self.n_iter = n_iter
        self.l2 = l2
        self.min_leaf = min_leaf
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y, sample_weight=None, feature_names=None):
        X = np.asarray(X, dtype=float)
        finite = np.where(np.isnan(X), 0.0, X)
        _, y, w = check_training_data(finite, y, sample_weight)
        self._set_features(X, feature_names)
        self.classes_ = np.array([0, 1])
        self.bin_edges_ = fit_bin_edges(X)
        binned = bin_data(X, self.bin_edges_)
        n_bins = np.array([len(e) + 1 for e in self.bin_edges_], dtype=np.int64)

        pos = np.sum(w * y)
        self.init_score_ = float(np.log(pos / np.sum(w * (1.0 - y))))
        raw = np.full(len(y), self.init_score_)
        self.trees_ = []
        self.train_loss_ = [weighted_log_loss(y, raw, w)]
        for _ in range(int(self.n_iter)):
            p = sigmoid(raw)
            grad = w * (p - y)
            hess = np.maximum(w * p * (1.0 - p), 1e-16)
            out = _grow_leafwise(
                binned, grad, hess, n_bins, int(self.max_leaves), float(self.min_leaf), float(self.l2), 1e-3 * float(np.min(w))
            )
            feature, bthr, left, right, value, cover, mleft, gain, leaf_of_row = out
            value = value * self.learning_rate
            thr = np.array(
                [
                    (self.bin_edges_[f][b] if b < len(self.bin_edges_[f]) else np.inf) if f >= 0 else 0.0
                    for f, b in zip(feature, bthr)
                ]
            )
            tree = Tree(feature, thr, left, right, value, cover, mleft, gain)
            self.trees_.append(tree)
            raw = raw + value[leaf_of_row]
            self.train_loss_.append(weighted_log_loss(y, raw, w))
        return self

    def predict_margin(self, X):
        X = self._check_predict(X, allow_nan=True)
        raw = np.full(X.shape[0], self.init_score_)
        for tree in self.trees_:
            raw += tree.predict(X)
        return raw

    def predict_proba(self, X):
        return proba_columns(sigmoid(self.predict_margin(X)))

    def predict(self, X, threshold=0.5):
        return (self.predict_proba(X)[:, 1] >= threshold).astype(int)

    def tree_gain_importance(self):
        imp = np.zeros(self.n_features_in_)
        for tree in self.trees_:
            split = tree.feature >= 0
            np.add.at(imp, tree.feature[split], tree.gain[split])
        total = imp.sum()
        return imp / total if total > 0 else imp
