"""Model registry: specs, hyperparameter spaces, class weights and fit helpers."""

import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import PredictionError, TrainingError
from .forest import RandomForestClassifier, RandomForestRegressor
from .hgbt import HistGradientBoostingClassifier
from .linear import L1LogisticRegression, LinearRegression
from .naive_bayes import GaussianNaiveBayes

CLASSIFIERS = ("logreg_l1", "gnb", "random_forest", "hgbt")
REGRESSORS = ("linear_reg", "rf_reg")

DEFAULTS = {
    "logreg_l1": {"lam": 0.01},
    "gnb": {"var_smoothing_exp": -9},
    "random_forest": {"n_trees": 100, "min_leaf": 1},
    "hgbt": {"learning_rate": 0.1, "max_leaves": 31, "n_iter": 100, "l2": 1.0},
    "linear_reg": {},
    "rf_reg": {"n_trees": 100, "min_leaf": 1},
}


@dataclass
class ModelSpec:
    algorithm: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in DEFAULTS:
            raise TrainingError(f"unknown algorithm {self.algorithm!r}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.algorithm])
        if unknown:
            raise TrainingError(f"{self.algorithm}: unknown hyperparameters {sorted(unknown)}")
        merged = dict(DEFAULTS[self.algorithm])
        merged.update(self.hyperparameters)
        self.hyperparameters = merged


@dataclass(frozen=True)
class ClassWeights:
    negative: float
    positive: float

    def sample_weights(self, y):
        y = np.asarray(y)
        return np.where(y == 1, self.positive, self.negative).astype(float)


def class_weights(y):
    """w_c = n / (2 n_c)."""
    y = np.asarray(y)
    n = len(y)
    n1 = int(np.sum(y == 1))
    n0 = int(np.sum(y == 0))
    if n0 == 0 or n1 == 0:
        raise TrainingError("class weights need both classes present")
    return ClassWeights(negative=n / (2.0 * n0), positive=n / (2.0 * n1))


def _log_uniform(rng, lo, hi):
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def sample_hyperparameters(algorithm, rng, n_rows, n_features):
    """Draw one configuration from the data-adaptive search space."""
    if algorithm == "logreg_l1":
        # penalty on the summed loss ranges over [1e-4 n, 1e2 n]; the fitted loss is a mean
        return {"lam": _log_uniform(rng, 1e-4 * n_rows, 1e2 * n_rows) / n_rows}
    if algorithm == "gnb":
        return {"var_smoothing_exp": int(rng.integers(-12, -5))}
    if algorithm in ("random_forest", "rf_reg"):
        return {
            "n_trees": int(rng.integers(100, 501)),
            "min_leaf": int(rng.integers(1, max(1, n_rows // 50) + 1)),
        }
    if algorithm == "hgbt":
        return {
            "learning_rate": _log_uniform(rng, 0.01, 0.3),
            "max_leaves": int(rng.integers(7, 64)),
            "n_iter": int(rng.integers(50, 501)),
            "l2": _log_uniform(rng, 1e-3, 10.0),
        }
    if algorithm == "linear_reg":
        return {}
    raise TrainingError(f"unknown algorithm {algorithm!r}")


def build_estimator(spec, n_jobs=1):
    hp = spec.hyperparameters
    algo = spec.algorithm
    if algo == "logreg_l1":
        return L1LogisticRegression(lam=hp["lam"])
    if algo == "gnb":
        return GaussianNaiveBayes(var_smoothing=10.0 ** hp["var_smoothing_exp"])
    if algo == "random_forest":
        return RandomForestClassifier(n_trees=hp["n_trees"], min_leaf=hp["min_leaf"], seed=spec.seed, n_jobs=n_jobs)
    if algo == "hgbt":
        return HistGradientBoostingClassifier(
            learning_rate=hp["learning_rate"],
            max_leaves=hp["max_leaves"],
            n_iter=hp["n_iter"],
            l2=hp["l2"],
            seed=spec.seed,
        )
    if algo == "linear_reg":
        return LinearRegression()
    if algo == "rf_reg":
        return RandomForestRegressor(n_trees=hp["n_trees"], min_leaf=hp["min_leaf"], seed=spec.seed, n_jobs=n_jobs)
    raise TrainingError(f"unknown algorithm {algo!r}")


def fit_classifier(spec, x, y, sample_weights=None, feature_names=None, n_jobs=1):
    if spec.algorithm not in CLASSIFIERS:
        raise TrainingError(f"{spec.algorithm!r} is not a classifier")
    model = build_estimator(spec, n_jobs)
    model.fit(x, y, sample_weight=sample_weights, feature_names=feature_names)
    model.spec_ = spec
    return model


def fit_regressor(spec, x, y, feature_names=None, n_jobs=1):
    if spec.algorithm not in REGRESSORS:
        raise TrainingError(f"{spec.algorithm!r} is not a regressor")
    model = build_estimator(spec, n_jobs)
    model.fit(x, y, feature_names=feature_names)
    model.spec_ = spec
    return model


def predict_proba(m, x):
    if not hasattr(m, "predict_proba"):
        raise PredictionError("model is not a classifier")
    x = np.asarray(x, dtype=float)
    if x.ndim == 2 and x.shape[0] == 0:
        return np.empty(0)
    return m.predict_proba(x)[:, 1]


def predict_value(m, x):
    if hasattr(m, "predict_proba"):
        raise PredictionError("model is a classifier; use predict_proba")
    x = np.asarray(x, dtype=float)
    if x.ndim == 2 and x.shape[0] == 0:
        return np.empty(0)
    return m.predict(x)
