"""Leakage-safe preprocessing transforms.

Each transformer learns a frozen :class:`FitState` in ``fit`` and only reads
that state in ``transform``. Rare-category merging and one-hot encoding work
on :class:`~mait.data.Table` objects; kNN imputation and robust scaling work
on float matrices with NaN marking missing cells.
"""

import hashlib
import pickle
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._utils import derive_rng
from .data import CATEGORICAL, CONTINUOUS, ColumnSpec, Table
from .exceptions import ImputationError, PropagationError

OTHER = "OTHER"


def _freeze(value):
    if isinstance(value, np.ndarray):
        value = value.copy()
        value.setflags(write=False)
        return value
    if isinstance(value, dict):
        return {k: _freeze(v) for k, v in value.items()}
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True)
class FitState:
    """Frozen parameters of a fitted transform.

    ``provenance`` names the split the state was fit on; the pipeline's
    leakage audit requires it to be ``"train"``.
    """

    kind: str
    params: dict
    fit_row_count: int
    provenance: str = "unspecified"
    flags: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "params", _freeze(self.params))

    def fingerprint(self):
        return hashlib.sha256(pickle.dumps((self.kind, self.params, self.fit_row_count))).hexdigest()


# rare-category merge ---------------------------------------------------------


class RareCategoryMerger(TransformerMixin, BaseEstimator):
    """Map categories whose training frequency is below ``min_fraction`` to ``"OTHER"``."""

    def __init__(self, min_fraction=0.05):
        self.min_fraction = min_fraction

    def fit(self, t, y=None, provenance="unspecified"):
        kept = {}
        for name in t.columns_of_kind(CATEGORICAL):
            obs = [v for v in t.column(name) if v is not None]
            cats, counts = np.unique(np.asarray(obs, dtype=str), return_counts=True) if obs else ([], [])
            kept[name] = tuple(
                sorted(str(c) for c, k in zip(cats, counts) if k / len(obs) >= self.min_fraction)
            )
        self.state_ = FitState("rare_merge", kept, t.row_count, provenance)
        return self

    def transform(self, t):
        check_is_fitted(self, "state_")
        specs, cols = [], []
        for name, kept in self.state_.params.items():
            keep = set(kept)
            col = [None if v is None else (v if v in keep else OTHER) for v in t.column(name)]
            specs.append(t.spec(name))
            cols.append(col)
        return t.with_columns(specs, cols)


# one-hot ---------------------------------------------------------------------


class OneHotEncoder(TransformerMixin, BaseEstimator):
    """Full-vocabulary indicator encoding; output columns are named ``"col=cat"``.

    Non-categorical columns keep their original order and come first; the
    encoded blocks follow in original column order. A MISSING category
    encodes as an all-zero block and an unseen category likewise.
    """

    def fit(self, t, y=None, provenance="unspecified"):
        vocab = {}
        for name in t.columns_of_kind(CATEGORICAL):
            vocab[name] = tuple(sorted({v for v in t.column(name) if v is not None}))
        self.state_ = FitState("one_hot", vocab, t.row_count, provenance)
        return self

    def transform(self, t):
        check_is_fitted(self, "state_")
        vocab = self.state_.params
        keep = [n for n in t.names if n not in vocab]
        specs = [t.spec(n) for n in keep]
        cols = [t.column(n) for n in keep]
        for name in t.names:
            if name not in vocab:
                continue
            col = t.column(name)
            for cat in vocab[name]:
                specs.append(ColumnSpec(f"{name}={cat}", CONTINUOUS))
                cols.append(np.array([1.0 if v == cat else 0.0 for v in col]))
        return Table(specs, cols)

    def feature_groups(self, names):
        """Map each output feature name to its original column name."""
        groups = {}
        for name in names:
            base = name.split("=", 1)[0] if "=" in name and name.split("=", 1)[0] in self.state_.params else name
            groups[name] = base
        return groups


# kNN imputation ---------------------------------------------------------------


def partial_distances(targets, donors):
    """Rescaled partial Euclidean distances between rows with NaN gaps.

    Distance uses the coordinates observed in both rows and is multiplied by
    sqrt(D / d) where d is the shared observed count; no overlap gives inf.
    """
    D = targets.shape[1]
    diff = targets[:, None, :] - donors[None, :, :]
    shared = ~np.isnan(diff)
    sq = np.where(shared, diff, 0.0) ** 2
    d = shared.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.sqrt(sq.sum(axis=2) * D / d)
    dist[d == 0] = np.inf
    return dist


class KNNImputer(TransformerMixin, BaseEstimator):
    """Fill NaN cells with the mean of the k nearest training donors.

    Donors for a cell in column c are the training rows with c observed,
    ordered by :func:`partial_distances` with ties going to the lower
    training index.
    """

    def __init__(self, k=5, batch_size=256):
        self.k = k
        self.batch_size = batch_size

    def fit(self, X, y=None, provenance="unspecified", feature_names=None):
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
        empty = [names[j] for j in np.flatnonzero(np.isnan(X).all(axis=0))]
        if empty:
            raise ImputationError(f"column(s) entirely missing in training data: {empty}")
        self.state_ = FitState(
            "knn_impute",
            {
                "donors": X,
                "column_means": np.nanmean(X, axis=0),
                "feature_names": tuple(names),
                "k": int(self.k),
            },
            X.shape[0],
            provenance,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "state_")
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan", copy=True)
        donors = self.state_.params["donors"]
        means = self.state_.params["column_means"]
        donor_obs = ~np.isnan(donors)
        rows = np.flatnonzero(np.isnan(X).any(axis=1))
        for start in range(0, len(rows), self.batch_size):
            batch = rows[start : start + self.batch_size]
            dist = partial_distances(X[batch], donors)
            for bi, r in enumerate(batch):
                for c in np.flatnonzero(np.isnan(X[r])):
                    ok = np.flatnonzero(donor_obs[:, c] & np.isfinite(dist[bi]))
                    if len(ok) == 0:
                        X[r, c] = means[c]
                        continue
                    order = ok[np.argsort(dist[bi, ok], kind="stable")]
                    X[r, c] = donors[order[: self.k], c].mean()
        return X


# robust scaling ---------------------------------------------------------------


class RobustScaler(TransformerMixin, BaseEstimator):
    """(x - median) / IQR per column; zero-IQR columns pass through and are flagged."""

    def fit(self, X, y=None, provenance="unspecified"):
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        q1, med, q3 = np.nanquantile(X, [0.25, 0.5, 0.75], axis=0, method="linear")
        iqr = q3 - q1
        flagged = tuple(int(j) for j in np.flatnonzero(iqr == 0))
        self.state_ = FitState(
            "robust_scale", {"median": med, "iqr": iqr}, X.shape[0], provenance, flagged
        )
        return self

    def _center_scale(self):
        med = self.state_.params["median"]
        iqr = self.state_.params["iqr"]
        ok = iqr > 0
        return np.where(ok, med, 0.0), np.where(ok, iqr, 1.0)

    def transform(self, X):
        check_is_fitted(self, "state_")
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        center, scale = self._center_scale()
        return (X - center) / scale

    def inverse_transform(self, X):
        center, scale = self._center_scale()
        return np.asarray(X, dtype=float) * scale + center


# functional aliases -------------------------------------------------------------


def fit_rare_merge(t, min_fraction, provenance="unspecified"):
    return RareCategoryMerger(min_fraction).fit(t, provenance=provenance).state_


def apply_rare_merge(state, t):
    m = RareCategoryMerger()
    m.state_ = state
    return m.transform(t)


def fit_one_hot(t, provenance="unspecified"):
    return OneHotEncoder().fit(t, provenance=provenance).state_


def apply_one_hot(state, t):
    enc = OneHotEncoder()
    enc.state_ = state
    return enc.transform(t)


def _continuous_matrix(t):
    names = t.columns_of_kind(CONTINUOUS)
    return names, t.matrix(names)


def fit_knn_impute(t, k, provenance="unspecified"):
    """Fit on the continuous columns of a table (or on a matrix)."""
    if isinstance(t, Table):
        names, X = _continuous_matrix(t)
        return KNNImputer(k).fit(X, provenance=provenance, feature_names=names).state_
    return KNNImputer(k).fit(t, provenance=provenance).state_


def apply_knn_impute(state, t):
    imp = KNNImputer(state.params["k"])
    imp.state_ = state
    if isinstance(t, Table):
        names, X = _continuous_matrix(t)
        out = imp.transform(X)
        return t.with_columns([t.spec(n) for n in names], list(out.T))
    return imp.transform(t)


def fit_robust_scale(t, provenance="unspecified"):
    if isinstance(t, Table):
        _, X = _continuous_matrix(t)
        return RobustScaler().fit(X, provenance=provenance).state_
    return RobustScaler().fit(t, provenance=provenance).state_


def apply_robust_scale(state, t):
    sc = RobustScaler()
    sc.state_ = state
    if isinstance(t, Table):
        names, X = _continuous_matrix(t)
        out = sc.transform(X)
        return t.with_columns([t.spec(n) for n in names], list(out.T))
    return sc.transform(t)


# label propagation --------------------------------------------------------------


def median_pairwise_distance(X):
    X = np.asarray(X, dtype=float)
    sq = np.sum(X**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    iu = np.triu_indices(len(X), k=1)
    return float(np.median(np.sqrt(d2[iu])))


class LabelPropagation(BaseEstimator):
    """Graph label propagation with an RBF affinity and clamped known labels.

    Unknown labels are encoded as -1 or NaN. After ``fit``, ``labels_`` holds
    the completed labels and ``confidence_`` the winning row mass.
    """

    def __init__(self, sigma=None, max_iter=1000, tol=1e-6):
        self.sigma = sigma
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float)
        known = ~np.isnan(y) & (y >= 0)
        for cls in (0, 1):
            if not np.any(known & (y == cls)):
                raise PropagationError(f"class {cls} has no known labels")
        sigma = self.sigma if self.sigma is not None else median_pairwise_distance(X)
        if not sigma > 0:
            sigma = 1.0
        sq = np.sum(X**2, axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
        W = np.exp(-d2 / (2.0 * sigma**2))
        np.fill_diagonal(W, 0.0)
        rs = W.sum(axis=1, keepdims=True)
        T = np.divide(W, rs, out=np.zeros_like(W), where=rs > 0)

        clamp = np.zeros((len(y), 2))
        clamp[known, y[known].astype(int)] = 1.0
        F = np.where(known[:, None], clamp, 0.5)
        self.n_iter_ = 0
        for it in range(1, self.max_iter + 1):
            F_new = T @ F
            F_new[known] = clamp[known]
            delta = np.max(np.abs(F_new - F))
            F = F_new
            self.n_iter_ = it
            if delta < self.tol:
                break
        self.sigma_ = sigma
        self.label_distributions_ = F
        self.labels_ = np.where(known, y, np.argmax(F, axis=1)).astype(int)
        self.confidence_ = np.where(known, 1.0, F.max(axis=1))
        return self


def propagate_labels(x, y, sigma=None, max_iter=1000, tol=1e-6):
    lp = LabelPropagation(sigma, max_iter, tol).fit(x, y)
    return lp.labels_, lp.confidence_


# oversampling --------------------------------------------------------------------


def random_oversample(x, y, seed=0):
    """Duplicate minority rows (sampled with replacement) until classes balance.

    Returns ``(x_resampled, y_resampled, indices)`` where ``indices`` maps
    output rows back to input rows; the originals come first.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    idx = np.arange(len(y))
    if len(classes) == 2 and counts[0] != counts[1]:
        minority = classes[np.argmin(counts)]
        pool = np.flatnonzero(y == minority)
        extra = derive_rng(seed, "oversample").choice(pool, abs(counts[1] - counts[0]), replace=True)
        idx = np.concatenate([idx, extra])
    return x[idx], y[idx], idx
