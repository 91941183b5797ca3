"""Random survival forest with log-rank splitting and Nelson-Aalen leaves."""

import math

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from .._utils import derive_rng, derive_seed, parallel_map
from ..exceptions import PredictionError, TrainingError
from ..models._tree import Tree, _shuffle
from .nonparametric import nelson_aalen, step_interpolate, unpack_target

N_THRESHOLDS = 10


@njit(nogil=True, cache=True)
def _logrank(time, event, cnt, idx, s, e, goes_left):
    """Standardised log-rank statistic for left vs right over idx[s:e] (sorted by time)."""
    Y = 0.0
    YL = 0.0
    O = 0.0
    E = 0.0
    V = 0.0
    i = e - 1
    while i >= s:
        t = time[idx[i]]
        j = i
        d = 0.0
        dl = 0.0
        # rows tied at t join the risk set before counting events at t
        while j >= s and time[idx[j]] == t:
            r = idx[j]
            Y += cnt[r]
            if goes_left[j - s]:
                YL += cnt[r]
                dl += cnt[r] * event[r]
            d += cnt[r] * event[r]
            j -= 1
        if d > 0:
            O += dl
            E += d * YL / Y
            if Y > 1:
                V += d * (YL / Y) * (1.0 - YL / Y) * (Y - d) / (Y - 1.0)
        i = j
    if V <= 0:
        return 0.0
    return abs(O - E) / math.sqrt(V)


@njit(nogil=True, cache=True)
def _grow_logrank(X, time, event, cnt, rows, max_features, min_leaf, max_depth, seed):
    n_rows = rows.shape[0]
    D = X.shape[1]
    cap = 2 * n_rows + 1
    feature = -np.ones(cap, dtype=np.int64)
    threshold = np.zeros(cap)
    left = -np.ones(cap, dtype=np.int64)
    right = -np.ones(cap, dtype=np.int64)
    cover = np.zeros(cap)
    gain = np.zeros(cap)

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    idx = rows.copy()
    buf = np.empty(n_rows, dtype=np.int64)
    feats = np.arange(D)
    vals = np.empty(n_rows)
    goes_left = np.empty(n_rows, dtype=np.bool_)
    cand = np.empty(N_THRESHOLDS)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_start[0] = 0
    st_end[0] = n_rows
    st_node[0] = 0
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        s = st_start[sp]
        e = st_end[sp]
        node = st_node[sp]
        depth = st_depth[sp]
        N = 0.0
        n_ev = 0.0
        for i in range(s, e):
            N += cnt[idx[i]]
            n_ev += cnt[idx[i]] * event[idx[i]]
        cover[node] = N
        if N < 2 * min_leaf or n_ev == 0 or (max_depth >= 0 and depth >= max_depth):
            continue

        _shuffle(state, feats)
        best_f = -1
        best_thr = 0.0
        best_stat = -1.0
        m = e - s
        n_eval = 0
        for fi in range(D):
            if n_eval >= max_features and best_f >= 0:
                break
            f = feats[fi]
            for i in range(m):
                vals[i] = X[idx[s + i], f]
            sv = np.sort(vals[:m])
            n_eval += 1
            if sv[0] == sv[m - 1]:
                continue
            # candidate thresholds: distinct node-value quantiles, excluding the maximum
            nc = 0
            for q in range(1, N_THRESHOLDS + 1):
                v = sv[(q * (m - 1)) // (N_THRESHOLDS + 1)]
                if v < sv[m - 1] and (nc == 0 or v > cand[nc - 1]):
                    cand[nc] = v
                    nc += 1
            for c in range(nc):
                thr = cand[c]
                nl = 0.0
                for i in range(m):
                    goes_left[i] = vals[i] <= thr
                    if goes_left[i]:
                        nl += cnt[idx[s + i]]
                if nl < min_leaf or N - nl < min_leaf:
                    continue
                stat = _logrank(time, event, cnt, idx, s, e, goes_left)
                if stat > best_stat + 1e-12:
                    best_f, best_thr, best_stat = f, thr, stat
                elif abs(stat - best_stat) <= 1e-12 and (f < best_f or (f == best_f and thr < best_thr)):
                    best_f, best_thr, best_stat = f, thr, stat
        if best_f < 0:
            continue

        # stable partition keeps each child sorted by time
        nl = 0
        for i in range(s, e):
            if X[idx[i], best_f] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        k = nl
        for i in range(s, e):
            if X[idx[i], best_f] > best_thr:
                buf[k] = idx[i]
                k += 1
        for i in range(m):
            idx[s + i] = buf[i]
        mid = s + nl
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode
        gain[node] = best_stat
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

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], cover[:n_nodes], gain[:n_nodes]


class SurvivalTree:
    """A log-rank tree plus the Nelson-Aalen curve of every leaf on ``grid``."""

    def __init__(self, tree, grid, curves):
        self.tree = tree
        self.grid = grid
        self.curves = curves  # n_nodes x len(grid), zero rows for internal nodes

    def predict_chf(self, X, grid):
        leaves = self.tree.apply(X)
        return step_interpolate(self.grid, self.curves[leaves], grid)


def grow_survival_tree(X, time, event, cnt, max_features, min_leaf, max_depth, seed):
    rows = np.flatnonzero(cnt > 0)
    rows = rows[np.argsort(time[rows], kind="stable")].astype(np.int64)
    f, t, l, r, c, g = _grow_logrank(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(time, dtype=np.float64),
        np.ascontiguousarray(event, dtype=np.float64),
        np.ascontiguousarray(cnt, dtype=np.float64),
        rows,
        int(max_features),
        int(min_leaf),
        -1 if max_depth is None else int(max_depth),
        np.uint64(seed),
    )
    tree = Tree(f, t, l, r, np.zeros(len(f)), c, None, g)
    grid = np.unique(time[rows][event[rows] == 1])
    curves = np.zeros((tree.n_nodes, len(grid)))
    leaves = tree.apply(X[rows])
    for leaf in np.unique(leaves):
        members = rows[leaves == leaf]
        na = nelson_aalen(time[members], event[members], weights=cnt[members])
        curves[leaf] = step_interpolate(na.time_grid, na.chf, grid)
    return SurvivalTree(tree, grid, curves)


class RandomSurvivalForest(BaseEstimator):
    """Bagged log-rank survival trees.

    The ensemble cumulative hazard of a row is the pointwise mean of the leaf
    curves it reaches, each step-interpolated onto the union event-time grid
    ``event_times_``.  ``predict_risk`` is the final-grid cumulative hazard.
    """

    margin_scale = "chf"

    def __init__(self, n_trees=100, min_leaf=5, max_features="sqrt", max_depth=None, bootstrap=True, seed=0, n_jobs=1):
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y, event=None):
        X = np.asarray(X, dtype=float)
        time, ev = unpack_target(y, event)
        if self.n_trees < 1:
            raise TrainingError("n_trees must be at least 1")
        if X.ndim != 2 or len(X) != len(time):
            raise TrainingError("feature matrix and survival target disagree in length")
        if not np.all(np.isfinite(X)):
            raise TrainingError("non-finite feature values")
        if ev.sum() == 0:
            raise TrainingError("no events in training data")
        n, D = X.shape
        if self.max_features == "sqrt":
            mf = max(1, int(math.sqrt(D)))
        elif self.max_features is None:
            mf = D
        else:
            mf = max(1, min(D, int(self.max_features)))

        def one(i):
            if self.bootstrap:
                draws = derive_rng(self.seed, "bootstrap", i).integers(0, n, n)
                cnt = np.bincount(draws, minlength=n).astype(float)
                if ev[cnt > 0].sum() == 0:
                    cnt = np.ones(n)
            else:
                cnt = np.ones(n)
            return grow_survival_tree(X, time, ev, cnt, mf, self.min_leaf, self.max_depth, derive_seed(self.seed, "tree", i))

        self.trees_ = parallel_map(one, range(self.n_trees), self.n_jobs)
        self.event_times_ = np.unique(time[ev == 1])
        self.n_features_in_ = D
        return self

    def predict_chf(self, X, grid=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise PredictionError(f"expected {self.n_features_in_} features, got {X.shape[-1]}")
        grid = self.event_times_ if grid is None else np.asarray(grid, dtype=float)
        out = np.zeros((X.shape[0], len(grid)))
        for st in self.trees_:
            out += st.predict_chf(X, grid)
        return out / len(self.trees_)

    def predict_risk(self, X):
        return self.predict_chf(X)[:, -1]

    def used_features(self):
        return set().union(*(st.tree.used_features() for st in self.trees_))

    def tree_gain_importance(self):
        imp = np.zeros(self.n_features_in_)
        for st in self.trees_:
            split = st.tree.feature >= 0
            np.add.at(imp, st.tree.feature[split], st.tree.gain[split])
        total = imp.sum()
        return imp / total if total > 0 else imp


def fit_rsf(X, time, event, n_trees=100, min_leaf=5, seed=0, **kwargs):
    return RandomSurvivalForest(n_trees=n_trees, min_leaf=min_leaf, seed=seed, **kwargs).fit(X, time, event)
