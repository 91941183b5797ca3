"""Cross-validated probability-threshold tuning."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class ThresholdTrace:
    initial: float
    estimates: list
    applied: list
    final: float


def minority_fraction(y):
    y = np.asarray(y)
    pos = float(np.mean(y == 1))
    return min(pos, 1.0 - pos)


def fold_estimate(y, p):
    """Midpoint of the two class-conditional mean probabilities (NaN if a class is absent)."""
    y = np.asarray(y).astype(int)
    p = np.asarray(p, dtype=float)
    if not (np.any(y == 0) and np.any(y == 1)):
        return math.nan
    return float((p[y == 0].mean() + p[y == 1].mean()) / 2.0)


def tune_threshold(fold_predictions, initial):
    """Threshold applied to fold f is the median of the estimates of folds before f.

    ``fold_predictions`` is a sequence of ``(y, p)`` pairs in fold order.
    Folds lacking a class contribute no estimate.
    """
    estimates = [fold_estimate(y, p) for y, p in fold_predictions]
    applied = []
    for f in range(len(estimates)):
        history = [e for e in estimates[:f] if not math.isnan(e)]
        applied.append(float(np.median(history)) if history else float(initial))
    available = [e for e in estimates if not math.isnan(e)]
    final = float(np.median(available)) if available else float(initial)
    return ThresholdTrace(float(initial), estimates, applied, final)
