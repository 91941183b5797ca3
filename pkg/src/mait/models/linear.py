"""L1-penalised logistic regression and ordinary least squares."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from ..exceptions import TrainingError
from ._base import ZooMixin, check_training_data, proba_columns, sigmoid


def _weighted_standardize(X, w):
    sw = w / w.sum()
    mean = sw @ X
    std = np.sqrt(sw @ (X - mean) ** 2)
    scale = np.where(std > 0, std, 1.0)
    Z = (X - mean) / scale
    Z[:, std == 0] = 0.0
    return Z, mean, scale, std > 0


def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


class L1LogisticRegression(ClassifierMixin, ZooMixin, BaseEstimator):
    """Weighted logistic regression with an L1 penalty on the slopes.

    Minimises ``sum_i w_i * logloss_i / sum_i w_i + lam * ||beta||_1`` with
    an unpenalised intercept, by accelerated proximal gradient with
    backtracking. Columns are standardised internally (weighted mean and
    standard deviation) and the penalty acts on standardised slopes;
    ``coef_`` and ``intercept_`` are reported on the original scale.
    """

    margin_scale = "margin"

    def __init__(self, lam=0.01, max_iter=10000, tol=1e-7):
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y, sample_weight=None, feature_names=None):
        X, y, w = check_training_data(X, y, sample_weight)
        self._set_features(X, feature_names)
        self.classes_ = np.array([0, 1])
        Z, mean, scale, active = _weighted_standardize(X, w)
        sw = w / w.sum()
        D = Z.shape[1]

        def loss(theta):
            eta = theta[0] + Z @ theta[1:]
            return float(sw @ (np.logaddexp(0.0, eta) - y * eta))

        def grad(theta):
            r = sw * (sigmoid(theta[0] + Z @ theta[1:]) - y)
            return np.concatenate([[r.sum()], Z.T @ r])

        def prox(theta, step):
            out = theta.copy()
            out[1:] = _soft(theta[1:], step * self.lam)
            out[1:][~active] = 0.0
            return out

        prev = sw @ y
        theta = np.zeros(D + 1)
        theta[0] = np.log(prev / (1.0 - prev))
        momentum = theta.copy()
        t_k = 1.0
        L = 1.0
        self.n_iter_ = 0
        for it in range(1, int(self.max_iter) + 1):
            g = grad(momentum)
            f_m = loss(momentum)
            while True:
                cand = prox(momentum - g / L, 1.0 / L)
                diff = cand - momentum
                if loss(cand) <= f_m + g @ diff + 0.5 * L * (diff @ diff) + 1e-15:
                    break
                L *= 2.0
            change = np.max(np.abs(cand - theta))
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k)) / 2.0
            # restart momentum whenever the step goes uphill in the composite objective
            if loss(cand) + self.lam * np.abs(cand[1:]).sum() > loss(theta) + self.lam * np.abs(theta[1:]).sum():
                momentum = theta.copy()
                t_k = 1.0
                self.n_iter_ = it
                continue
            momentum = cand + ((t_k - 1.0) / t_next) * (cand - theta)
            theta = cand
            t_k = t_next
            L = max(L / 1.5, 1e-6)
            self.n_iter_ = it
            if change < self.tol:
                break
        self.std_coef_ = theta[1:].copy()
        self.coef_ = theta[1:] / scale
        self.intercept_ = float(theta[0] - np.sum(theta[1:] * mean / scale))
        return self

    def predict_margin(self, X):
        X = self._check_predict(X)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return proba_columns(sigmoid(self.predict_margin(X)))

    def predict(self, X, threshold=0.5):
        return (self.predict_proba(X)[:, 1] >= threshold).astype(int)


class LinearRegression(RegressorMixin, ZooMixin, BaseEstimator):
    """Ordinary least squares via the normal equations (ridge jitter 1e-10 if singular)."""

    margin_scale = "value"

    def __init__(self, jitter=1e-10):
        self.jitter = jitter

    def fit(self, X, y, sample_weight=None, feature_names=None):
        X, y, w = check_training_data(X, y, sample_weight, classification=False)
        if X.shape[0] < 2:
            raise TrainingError("regression needs at least two rows")
        self._set_features(X, feature_names)
        A = np.column_stack([np.ones(len(y)), X])
        gram = A.T @ (w[:, None] * A)
        rhs = A.T @ (w * y)
        try:
            if np.linalg.cond(gram) > 1e12:
                raise np.linalg.LinAlgError
            sol = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.solve(gram + self.jitter * np.eye(len(gram)), rhs)
        self.intercept_ = float(sol[0])
        self.coef_ = sol[1:]
        return self

    def predict_margin(self, X):
        X = self._check_predict(X)
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return self.predict_margin(X)
