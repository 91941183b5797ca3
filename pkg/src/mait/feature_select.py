"""Greedy mRMR feature ranking (difference scheme)."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import OUTCOME_KINDS
from .exceptions import SelectionError
from .quality import plugin_mi, quantile_codes, spearman


@dataclass
class FeatureRanking:
    names: list
    indices: list
    relevance: list
    redundancy: list
    score: list
    k_requested: int


def relevance_scores(X, y, bins=10):
    return np.array([plugin_mi(quantile_codes(X[:, j], bins), y) for j in range(X.shape[1])])


def mrmr_rank(x, y, k, feature_names=None, bins=10):
    """Rank features by relevance (binned MI) minus mean |Spearman| to those already chosen.

    Deterministic; ties go to the lower column index.
    """
    if k < 1:
        raise SelectionError("k must be at least 1")
    X = check_array(x, dtype=float)
    y = np.asarray(y)
    D = X.shape[1]
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(D)]
    rel = relevance_scores(X, y, bins)
    abs_rho = np.full((D, D), np.nan)

    def rho(i, j):
        if np.isnan(abs_rho[i, j]):
            r = spearman(X[:, i], X[:, j])
            abs_rho[i, j] = abs_rho[j, i] = 0.0 if np.isnan(r) else abs(r)
        return abs_rho[i, j]

    chosen, red_hist, score_hist = [], [], []
    remaining = list(range(D))
    for _ in range(min(k, D)):
        best, best_score, best_red = None, -np.inf, 0.0
        for j in remaining:
            red = float(np.mean([rho(j, s) for s in chosen])) if chosen else 0.0
            score = rel[j] - red
            if score > best_score:
                best, best_score, best_red = j, score, red
        chosen.append(best)
        remaining.remove(best)
        red_hist.append(best_red)
        score_hist.append(best_score)
    return FeatureRanking(
        names=[names[j] for j in chosen],
        indices=chosen,
        relevance=[float(rel[j]) for j in chosen],
        redundancy=red_hist,
        score=[float(s) for s in score_hist],
        k_requested=k,
    )


def apply_ranking(t, r):
    """Restrict a table to the ranked features (in rank order) plus outcome columns."""
    missing = [n for n in r.names if n not in t.names]
    if missing:
        raise SelectionError(f"ranked feature(s) absent from table: {missing}")
    outcomes = [s.name for s in t.specs if s.kind in OUTCOME_KINDS]
    return t.select(list(r.names) + outcomes)


class MRMRSelector(TransformerMixin, BaseEstimator):
    def __init__(self, k=10, bins=10):
        self.k = k
        self.bins = bins

    def fit(self, X, y, feature_names=None):
        self.ranking_ = mrmr_rank(X, y, self.k, feature_names, self.bins)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "ranking_")
        return np.asarray(X, dtype=float)[:, self.ranking_.indices]
