"""Weighted Gaussian naive Bayes."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ._base import ZooMixin, check_training_data, proba_columns, sigmoid


class GaussianNaiveBayes(ClassifierMixin, ZooMixin, BaseEstimator):
    """Closed-form weighted Gaussian naive Bayes.

    Per-class means, variances and priors are weighted by ``sample_weight``;
    variances are floored at ``var_smoothing`` times the largest weighted
    feature variance.
    """

    margin_scale = "margin"

    def __init__(self, var_smoothing=1e-9):
        self.var_smoothing = var_smoothing

    def fit(self, X, y, sample_weight=None, feature_names=None):
        X, y, w = check_training_data(X, y, sample_weight)
        self._set_features(X, feature_names)
        self.classes_ = np.array([0, 1])
        sw = w / w.sum()
        overall_mean = sw @ X
        floor = self.var_smoothing * float(np.max(sw @ (X - overall_mean) ** 2))
        if floor <= 0.0:  # every feature constant
            floor = self.var_smoothing
        self.theta_ = np.zeros((2, X.shape[1]))
        self.var_ = np.zeros((2, X.shape[1]))
        self.class_prior_ = np.zeros(2)
        for c in (0, 1):
            m = y == c
            wc = w[m]
            self.class_prior_[c] = wc.sum() / w.sum()
            mu = wc @ X[m] / wc.sum()
            self.theta_[c] = mu
            self.var_[c] = np.maximum(wc @ (X[m] - mu) ** 2 / wc.sum(), floor)
        self.epsilon_ = floor
        return self

    def _joint_log_likelihood(self, X):
        out = np.empty((X.shape[0], 2))
        for c in (0, 1):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
            ll = ll - 0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            out[:, c] = np.log(self.class_prior_[c]) + ll
        return out

    def predict_margin(self, X):
        jll = self._joint_log_likelihood(self._check_predict(X))
        return jll[:, 1] - jll[:, 0]

    def predict_proba(self, X):
        return proba_columns(sigmoid(self.predict_margin(X)))

    def predict(self, X, threshold=0.5):
        return (self.predict_proba(X)[:, 1] >= threshold).astype(int)
