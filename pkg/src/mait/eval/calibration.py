"""Isotonic (PAVA) calibration and split-conformal prediction sets."""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import CalibrationError, ConformalError


def pava(y, w=None):
    """Weighted pool-adjacent-violators fit of a non-decreasing sequence."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    means, weights, sizes = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, s2 = means.pop(), weights.pop(), sizes.pop()
            tw = weights[-1] + w2
            means[-1] = (means[-1] * weights[-1] + m2 * w2) / tw
            weights[-1] = tw
            sizes[-1] += s2
    return np.repeat(means, sizes)


class IsotonicCalibrator(TransformerMixin, BaseEstimator):
    """Monotone step map from raw probabilities to calibrated ones.

    Points with equal raw probability are pooled first. New inputs take the
    fitted value of the largest calibration probability at or below them
    (right-continuous steps); inputs below the smallest calibration point
    take the first step's value.
    """

    def fit(self, p, y):
        p = np.asarray(p, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if len(p) < 2:
            raise CalibrationError("isotonic calibration needs at least two points")
        xs, inverse = np.unique(p, return_inverse=True)
        counts = np.bincount(inverse).astype(float)
        sums = np.bincount(inverse, weights=y)
        self.x_ = xs
        self.y_ = np.clip(pava(sums / counts, counts), 0.0, 1.0)
        return self

    def predict(self, p):
        check_is_fitted(self, "x_")
        p = np.asarray(p, dtype=float)
        idx = np.searchsorted(self.x_, p, side="right") - 1
        return np.clip(self.y_[np.clip(idx, 0, len(self.y_) - 1)], 0.0, 1.0)

    def transform(self, p):
        return self.predict(p)


def isotonic_calibrate(p, y):
    return IsotonicCalibrator().fit(p, y)


def true_class_probability(p1, y):
    p1 = np.asarray(p1, dtype=float)
    return np.where(np.asarray(y) == 1, p1, 1.0 - p1)


def conformal_quantile(scores, alpha):
    """The ceil((n+1)(1-alpha))-th smallest score, or 1 when that index exceeds n."""
    scores = np.sort(np.asarray(scores, dtype=float))
    n = len(scores)
    if n == 0:
        raise ConformalError("empty calibration set")
    k = math.ceil((n + 1) * (1.0 - alpha) - 1e-12)
    return 1.0 if k > n else float(scores[k - 1])


class SplitConformalClassifier(BaseEstimator):
    """Split-conformal label sets with nonconformity 1 - p(true class)."""

    def __init__(self, alpha=0.1):
        self.alpha = alpha

    def fit(self, p1, y):
        self.scores_ = 1.0 - true_class_probability(p1, y)
        self.q_hat_ = conformal_quantile(self.scores_, self.alpha)
        return self

    def predict_set(self, p1):
        """Boolean matrix; column 0 / 1 says whether label 0 / 1 is in the set."""
        check_is_fitted(self, "q_hat_")
        p1 = np.asarray(p1, dtype=float)
        return np.column_stack([p1 <= self.q_hat_, 1.0 - p1 <= self.q_hat_])


def conformal_set(cal_true_p, alpha, new_p):
    """Label sets for class-1 probabilities ``new_p`` from calibration p(true class)."""
    q = conformal_quantile(1.0 - np.asarray(cal_true_p, dtype=float), alpha)
    new_p = np.asarray(new_p, dtype=float)
    return np.column_stack([new_p <= q, 1.0 - new_p <= q])


def coverage(sets, y):
    y = np.asarray(y).astype(int)
    return float(np.mean(sets[np.arange(len(y)), y]))
