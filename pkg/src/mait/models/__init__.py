from .forest import RandomForestClassifier, RandomForestRegressor
from .hgbt import HistGradientBoostingClassifier
from .linear import L1LogisticRegression, LinearRegression
from .naive_bayes import GaussianNaiveBayes
from .serialize import dump_model, load_model
from .zoo import (
    CLASSIFIERS,
    REGRESSORS,
    ClassWeights,
    ModelSpec,
    build_estimator,
    class_weights,
    fit_classifier,
    fit_regressor,
    predict_proba,
    predict_value,
    sample_hyperparameters,
)

__all__ = [
    "CLASSIFIERS",
    "REGRESSORS",
    "ClassWeights",
    "GaussianNaiveBayes",
    "HistGradientBoostingClassifier",
    "L1LogisticRegression",
    "LinearRegression",
    "ModelSpec",
    "RandomForestClassifier",
    "RandomForestRegressor",
    "build_estimator",
    "class_weights",
    "dump_model",
    "fit_classifier",
    "fit_regressor",
    "load_model",
    "predict_proba",
    "predict_value",
    "sample_hyperparameters",
]
