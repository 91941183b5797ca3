from .calibration import (
    IsotonicCalibrator,
    SplitConformalClassifier,
    conformal_quantile,
    conformal_set,
    coverage,
    isotonic_calibrate,
    pava,
    true_class_probability,
)
from .cv import CVResult, cross_validate, random_search, select_best, stratified_folds
from .dca import NetBenefitCurve, default_grid, net_benefit_curve
from .metrics import METRIC_NAMES, MetricSet, average_precision, compute_metrics, roc_auc
from .threshold import ThresholdTrace, fold_estimate, minority_fraction, tune_threshold
from .uncertainty import UncertaintyResult, uncertainty_filter

__all__ = [
    "CVResult",
    "IsotonicCalibrator",
    "METRIC_NAMES",
    "MetricSet",
    "NetBenefitCurve",
    "SplitConformalClassifier",
    "ThresholdTrace",
    "UncertaintyResult",
    "average_precision",
    "compute_metrics",
    "conformal_quantile",
    "conformal_set",
    "coverage",
    "cross_validate",
    "default_grid",
    "fold_estimate",
    "isotonic_calibrate",
    "minority_fraction",
    "net_benefit_curve",
    "pava",
    "random_search",
    "roc_auc",
    "select_best",
    "stratified_folds",
    "true_class_probability",
    "tune_threshold",
    "uncertainty_filter",
]
