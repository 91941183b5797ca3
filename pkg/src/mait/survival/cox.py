"""Elastic-net penalised Cox proportional hazards model with a Breslow baseline."""

import numpy as np
from sklearn.base import BaseEstimator

from ..exceptions import PredictionError, TrainingError
from .nonparametric import step_interpolate, unpack_target


def _risk_groups(time):
    """Sort order (descending time) and, per sorted row, the index closing its tie group."""
    order = np.argsort(-time, kind="stable")
    ts = time[order]
    # risk-set sums must include all rows tied with the current one
    last = np.searchsorted(-ts, -ts, side="right") - 1
    return order, last


def partial_log_likelihood(eta, time, event):
    """Breslow log partial likelihood for linear predictor ``eta``."""
    eta = np.asarray(eta, dtype=float)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=float)
    order, last = _risk_groups(time)
    m = eta.max() if eta.size else 0.0
    s0 = np.cumsum(np.exp(eta[order] - m))[last]
    ev = event[order]
    return float(np.sum(ev * (eta[order] - m - np.log(s0))))


def _gradient_weights(eta, time, event, order, last):
    m = eta.max()
    e = np.exp(eta[order] - m)
    s0 = np.cumsum(e)[last]
    ev = event[order]
    # sum over event times t_k <= t_i of d_k / S0(t_k): cumulate from the smallest time
    a = np.cumsum((ev / s0)[::-1])[::-1]
    b = np.cumsum((ev / s0 ** 2)[::-1])[::-1]
    # rows tied with row i share all event times <= t_i, so use the group start
    first = np.searchsorted(-time[order], -time[order], side="left")
    a, b = a[first], b[first]
    g = ev - e * a
    h = e * a - e ** 2 * b
    out_g = np.empty_like(g)
    out_h = np.empty_like(h)
    out_g[order] = g
    out_h[order] = h
    return out_g, out_h


class CoxElasticNet(BaseEstimator):
    """Cox model minimising -loglik + lam * (alpha |b|_1 + (1 - alpha)/2 |b|^2).

    Features are standardised internally; ``coef_`` is on the original scale
    and ``std_coef_`` on the standardised one.  Optimised by iteratively
    reweighted least squares with cyclic coordinate descent and step halving.
    """

    margin_scale = "log_hazard"

    def __init__(self, lam=0.0, alpha=0.5, max_iter=200, tol=1e-9, inner_iter=1000):
        self.lam = lam
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.inner_iter = inner_iter

    def _objective(self, beta, xs, time, event):
        pen = self.lam * (self.alpha * np.abs(beta).sum() + 0.5 * (1 - self.alpha) * beta @ beta)
        return -partial_log_likelihood(xs @ beta, time, event) + pen

    def fit(self, X, y, event=None):
        X = np.asarray(X, dtype=float)
        time, ev = unpack_target(y, event)
        if X.ndim != 2 or len(X) != len(time):
            raise TrainingError("feature matrix and survival target disagree in length")
        if not np.all(np.isfinite(X)):
            raise TrainingError("non-finite feature values")
        if ev.sum() == 0:
            raise TrainingError("no events in training data")
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        xs = (X - self.mean_) / self.scale_
        xs[:, scale == 0] = 0.0
        n, p = xs.shape
        order, last = _risk_groups(time)
        beta = np.zeros(p)
        obj = self._objective(beta, xs, time, ev)
        l1 = self.lam * self.alpha
        l2 = self.lam * (1 - self.alpha)
        self.n_iter_ = 0
        for it in range(self.max_iter):
            eta = xs @ beta
            g, h = _gradient_weights(eta, time, ev, order, last)
            w = np.maximum(h, 1e-12)
            z = eta + g / w
            new = beta.copy()
            r = z - xs @ new
            col_w = (w[:, None] * xs ** 2).sum(axis=0)
            for _ in range(self.inner_iter):
                max_delta = 0.0
                for j in range(p):
                    if col_w[j] == 0:
                        continue
                    rho = (w * xs[:, j]) @ r + col_w[j] * new[j]
                    bj = np.sign(rho) * max(abs(rho) - l1, 0.0) / (col_w[j] + l2)
                    d = bj - new[j]
                    if d != 0.0:
                        r -= d * xs[:, j]
                        new[j] = bj
                        max_delta = max(max_delta, abs(d))
                if max_delta < self.tol:
                    break
            # step halving guards against IRLS overshoot
            step = 1.0
            cand = new
            cand_obj = self._objective(cand, xs, time, ev)
            while cand_obj > obj + 1e-12 and step > 1e-10:
                step /= 2
                cand = beta + step * (new - beta)
                cand_obj = self._objective(cand, xs, time, ev)
            delta = np.max(np.abs(cand - beta)) if p else 0.0
            beta, obj = cand, cand_obj
            self.n_iter_ = it + 1
            if delta < self.tol:
                break
        self.std_coef_ = beta
        self.coef_ = np.where(scale > 0, beta / self.scale_, 0.0)
        self.n_features_in_ = p
        self.loglik_ = partial_log_likelihood(xs @ beta, time, ev)
        self._fit_baseline(xs @ beta, time, ev)
        return self

    def _fit_baseline(self, eta, time, event):
        ev_times = np.unique(time[event == 1])
        e = np.exp(eta)
        hz = np.array([event[time == t].sum() / e[time >= t].sum() for t in ev_times])
        self.event_times_ = ev_times
        self.baseline_chf_ = np.cumsum(hz)

    def predict_risk(self, X):
        """Linear predictor on the standardised scale (higher means higher hazard)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise PredictionError(f"expected {self.n_features_in_} features, got {X.shape[-1]}")
        return ((X - self.mean_) / self.scale_) @ self.std_coef_

    def baseline_chf(self, grid=None):
        grid = self.event_times_ if grid is None else np.asarray(grid, dtype=float)
        return step_interpolate(self.event_times_, self.baseline_chf_, grid)

    def predict_chf(self, X, grid=None):
        h0 = self.baseline_chf(grid)
        return np.exp(self.predict_risk(X))[:, None] * h0[None, :]


def fit_cox_en(X, time, event, lam=0.0, alpha=0.5, **kwargs):
    return CoxElasticNet(lam=lam, alpha=alpha, **kwargs).fit(X, time, event)
