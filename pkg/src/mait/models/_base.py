"""Shared estimator plumbing for the model zoo."""

import numpy as np
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import PredictionError, TrainingError


def check_training_data(X, y, sample_weight=None, classification=True):
    try:
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    except ValueError as exc:
        raise TrainingError(str(exc)) from None
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) != X.shape[0]:
        raise TrainingError(f"X has {X.shape[0]} rows but y has {len(y)}")
    if not np.all(np.isfinite(y)):
        raise TrainingError("non-finite target values")
    if classification:
        if not np.all((y == 0) | (y == 1)):
            raise TrainingError("binary targets must be coded 0/1")
        if y.min() == y.max():
            raise TrainingError("training data contain a single class")
    if sample_weight is None:
        sample_weight = np.ones(len(y))
    sample_weight = np.asarray(sample_weight, dtype=np.float64).ravel()
    if len(sample_weight) != len(y) or np.any(sample_weight <= 0) or not np.all(np.isfinite(sample_weight)):
        raise TrainingError("sample weights must be positive, finite, one per row")
    return np.ascontiguousarray(X), y, sample_weight


class ZooMixin:
    """Feature-name bookkeeping and input checks shared by every model."""

    def _set_features(self, X, feature_names):
        self.n_features_in_ = X.shape[1]
        if feature_names is None:
            feature_names = [f"x{j}" for j in range(X.shape[1])]
        if len(feature_names) != X.shape[1]:
            raise TrainingError("feature_names length does not match X")
        self.feature_names_ = list(feature_names)

    def _check_predict(self, X, allow_nan=False):
        check_is_fitted(self, "n_features_in_")
        try:
            X = check_array(
                X,
                dtype=np.float64,
                ensure_all_finite="allow-nan" if allow_nan else True,
                ensure_min_samples=0,
            )
        except ValueError as exc:
            raise PredictionError(str(exc)) from None
        if X.shape[1] != self.n_features_in_ and not (X.shape[0] == 0):
            raise PredictionError(
                f"model was trained on {self.n_features_in_} features, got {X.shape[1]}"
            )
        return np.ascontiguousarray(X)

    def check_feature_names(self, names):
        if list(names) != self.feature_names_:
            raise PredictionError(
                f"feature names differ from training: {list(names)} vs {self.feature_names_}"
            )


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def proba_columns(p1):
    p1 = np.clip(p1, 0.0, 1.0)
    return np.column_stack([1.0 - p1, p1])
