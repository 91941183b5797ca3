"""Array-backed binary trees and the numba kernels that grow and walk them.

All kernels are ``nogil`` so forests can grow trees from a thread pool.
Randomness inside kernels comes from an explicit splitmix64 state so that
results depend only on the seed handed to each tree.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(nogil=True, cache=True)
def _rand_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(nogil=True, cache=True)
def _rand_below(state, n):
    return np.int64(_rand_u64(state) % np.uint64(n))


@njit(nogil=True, cache=True)
def _shuffle(state, arr):
    for i in range(len(arr) - 1, 0, -1):
        j = _rand_below(state, i + 1)
        arr[i], arr[j] = arr[j], arr[i]


class Tree:
    """Flat binary tree.

    Node ``i`` is a leaf when ``feature[i] == -1``. Rows go left when
    ``x[feature] <= threshold``; NaN follows ``missing_left``. ``cover`` is
    the number of training rows (with bootstrap multiplicity) in the node
    and ``gain`` the loss reduction achieved by its split.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "cover", "missing_left", "gain")

    def __init__(self, feature, threshold, left, right, value, cover, missing_left=None, gain=None):
        n = len(feature)
        self.feature = np.ascontiguousarray(feature, dtype=np.int64)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int64)
        self.right = np.ascontiguousarray(right, dtype=np.int64)
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.cover = np.ascontiguousarray(cover, dtype=np.float64)
        self.missing_left = np.ascontiguousarray(
            np.zeros(n, dtype=np.bool_) if missing_left is None else missing_left, dtype=np.bool_
        )
        self.gain = np.ascontiguousarray(np.zeros(n) if gain is None else gain, dtype=np.float64)

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def is_leaf(self):
        return self.feature < 0

    def apply(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _apply(self.feature, self.threshold, self.left, self.right, self.missing_left, X)

    def predict(self, X):
        return self.value[self.apply(X)]

    def depth(self):
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
        return int(d.max()) if self.n_nodes else 0

    def used_features(self):
        return set(int(f) for f in self.feature if f >= 0)

    def __eq__(self, other):
        return isinstance(other, Tree) and all(
            np.array_equal(getattr(self, a), getattr(other, a)) for a in self.__slots__
        )


@njit(nogil=True, cache=True)
def _apply(feature, threshold, left, right, missing_left, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            v = X[r, feature[node]]
            if np.isnan(v):
                node = left[node] if missing_left[node] else right[node]
            elif v <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


@njit(nogil=True, cache=True)
def _grow_cart(X, y, w, cnt, rows, max_features, min_leaf, max_depth, seed):
    """Grow a CART tree minimising weighted squared error.

    For 0/1 targets the weighted SSE of a node equals half its weighted Gini
    impurity times the node weight, so the same criterion serves both
    classification (Gini) and regression (variance reduction).
    """
    n_rows = rows.shape[0]
    D = X.shape[1]
    cap = 2 * n_rows + 1
    feature = -np.ones(cap, dtype=np.int64)
    threshold = np.zeros(cap)
    left = -np.ones(cap, dtype=np.int64)
    right = -np.ones(cap, dtype=np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)
    gain = np.zeros(cap)

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    idx = rows.copy()
    feats = np.arange(D)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    sp = 0
    st_start[0] = 0
    st_end[0] = n_rows
    st_node[0] = 0
    st_depth[0] = 0
    sp = 1
    n_nodes = 1
    vals = np.empty(n_rows)

    while sp > 0:
        sp -= 1
        s = st_start[sp]
        e = st_end[sp]
        node = st_node[sp]
        depth = st_depth[sp]

        W = 0.0
        S = 0.0
        Q = 0.0
        N = 0.0
        for i in range(s, e):
            r = idx[i]
            W += w[r]
            S += w[r] * y[r]
            Q += w[r] * y[r] * y[r]
            N += cnt[r]
        value[node] = S / W if W > 0 else 0.0
        cover[node] = N
        sse = Q - S * S / W if W > 0 else 0.0
        if N < 2 * min_leaf or sse <= 1e-12 * (abs(Q) + 1e-300) or (max_depth >= 0 and depth >= max_depth):
            continue

        _shuffle(state, feats)
        best_f = -1
        best_thr = 0.0
        best_imp = -np.inf
        n_eval = 0
        for fi in range(D):
            if n_eval >= max_features and best_f >= 0:
                break
            f = feats[fi]
            m = e - s
            for i in range(m):
                vals[i] = X[idx[s + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            n_eval += 1
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            wl = 0.0
            sl = 0.0
            ql = 0.0
            nl = 0.0
            for k in range(m - 1):
                r = idx[s + order[k]]
                wl += w[r]
                sl += w[r] * y[r]
                ql += w[r] * y[r] * y[r]
                nl += cnt[r]
                v0 = vals[order[k]]
                v1 = vals[order[k + 1]]
                if v0 == v1:
                    continue
                if nl < min_leaf or N - nl < min_leaf:
                    continue
                wr = W - wl
                if wl <= 0 or wr <= 0:
                    continue
                sr = S - sl
                qr = Q - ql
                imp = sse - (ql - sl * sl / wl) - (qr - sr * sr / wr)
                thr = 0.5 * (v0 + v1)
                if thr >= v1:
                    thr = v0
                tol = 1e-12 * max(1.0, abs(best_imp)) if best_imp > -np.inf else 0.0
                if imp > best_imp + tol:
                    best_f, best_thr, best_imp = f, thr, imp
                elif abs(imp - best_imp) <= tol and (f < best_f or (f == best_f and thr < best_thr)):
                    best_f, best_thr, best_imp = f, thr, imp
        if best_f < 0:
            continue

        # partition idx[s:e] on the chosen split
        lo = s
        hi = e - 1
        while lo <= hi:
            if X[idx[lo], best_f] <= best_thr:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1
        mid = lo
        if mid == s or mid == e:
            continue
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode
        gain[node] = best_imp
        st_start[sp] = mid
        st_end[sp] = e
        st_node[sp] = rnode
        st_depth[sp] = depth + 1
        sp += 1
        st_start[sp] = s
        st_end[sp] = mid
        st_node[sp] = lnode
        st_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        cover[:n_nodes],
        gain[:n_nodes],
    )


def grow_cart(X, y, w, cnt, max_features, min_leaf, max_depth, seed):
    """Grow one CART tree over the rows with positive multiplicity ``cnt``."""
    rows = np.flatnonzero(cnt > 0).astype(np.int64)
    out = _grow_cart(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(cnt, dtype=np.float64),
        rows,
        int(max_features),
        int(min_leaf),
        -1 if max_depth is None else int(max_depth),
        np.uint64(seed),
    )
    f, t, l, r, v, c, g = out
    return Tree(f, t, l, r, v, c, None, g)
