"""Random forests built from the numba CART kernel."""

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from .._utils import derive_rng, derive_seed, parallel_map
from ..exceptions import TrainingError
from ._base import ZooMixin, check_training_data, proba_columns
from ._tree import grow_cart


def _resolve_max_features(max_features, D):
    if max_features == "sqrt":
        return max(1, int(math.sqrt(D)))
    if max_features == "third":
        return max(1, D // 3)
    if max_features is None or max_features == "all":
        return D
    if isinstance(max_features, float):
        return max(1, int(max_features * D))
    return max(1, min(D, int(max_features)))


class _BaseForest(ZooMixin, BaseEstimator):
    _default_max_features = "sqrt"

    def _grow(self, X, y, w):
        n, D = X.shape
        mf = _resolve_max_features(
            self.max_features if self.max_features is not None else self._default_max_features, D
        )

        def one(i):
            if self.bootstrap:
                draws = derive_rng(self.seed, "bootstrap", i).integers(0, n, n)
                cnt = np.bincount(draws, minlength=n).astype(float)
            else:
                cnt = np.ones(n)
            return grow_cart(
                X, y, w * cnt, cnt, mf, self.min_leaf, self.max_depth, derive_seed(self.seed, "tree", i)
            )

        self.trees_ = parallel_map(one, range(self.n_trees), self.n_jobs)

    def _mean_tree_output(self, X):
        out = np.zeros(X.shape[0])
        for tree in self.trees_:
            out += tree.predict(X)
        return out / len(self.trees_)

    def tree_gain_importance(self):
        imp = np.zeros(self.n_features_in_)
        for tree in self.trees_:
            split = tree.feature >= 0
            np.add.at(imp, tree.feature[split], tree.gain[split])
        total = imp.sum()
        return imp / total if total > 0 else imp


class RandomForestClassifier(ClassifierMixin, _BaseForest):
    """Bagged CART classifier with weighted Gini splits.

    ``predict_proba`` is the mean over trees of the weighted class-1 fraction
    in the reached leaf, which is also the additive output used for tree
    attributions (probability scale).
    """

    margin_scale = "probability"

    def __init__(self, n_trees=100, min_leaf=1, max_features="sqrt", max_depth=None, bootstrap=True, seed=0, n_jobs=1):
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y, sample_weight=None, feature_names=None):
        X, y, w = check_training_data(X, y, sample_weight)
        self._set_features(X, feature_names)
        self.classes_ = np.array([0, 1])
        self._grow(X, y, w)
        return self

    def predict_margin(self, X):
        return self._mean_tree_output(self._check_predict(X))

    def predict_proba(self, X):
        return proba_columns(self.predict_margin(X))

    def predict(self, X, threshold=0.5):
        return (self.predict_proba(X)[:, 1] >= threshold).astype(int)


class RandomForestRegressor(RegressorMixin, _BaseForest):
    margin_scale = "value"
    _default_max_features = "third"

    def __init__(self, n_trees=100, min_leaf=1, max_features="third", max_depth=None, bootstrap=True, seed=0, n_jobs=1):
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y, sample_weight=None, feature_names=None):
        X, y, w = check_training_data(X, y, sample_weight, classification=False)
        if X.shape[0] < 2:
            raise TrainingError("regression needs at least two rows")
        self._set_features(X, feature_names)
        self._grow(X, y, w)
        return self

    def predict_margin(self, X):
        return self._mean_tree_output(self._check_predict(X))

    def predict(self, X):
        return self.predict_margin(X)
