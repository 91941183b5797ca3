"""Decision-curve analysis with a harm weight on false positives."""

from dataclasses import dataclass

import numpy as np

from .metrics import confusion_counts


@dataclass
class NetBenefitCurve:
    grid: np.ndarray
    model: np.ndarray
    treat_all: np.ndarray
    treat_none: np.ndarray
    random: np.ndarray
    harm_weight: float = 1.0


def default_grid(start=0.01, stop=0.99, step=0.01):
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 10)


def net_benefit(y, p, pt, harm_weight=1.0):
    tp, fp, _, _ = confusion_counts(y, p, pt)
    n = len(y)
    return tp / n - harm_weight * (fp / n) * pt / (1.0 - pt)


def net_benefit_curve(y, p, grid=None, harm_weight=1.0):
    """Net benefit of the model, treat-all, treat-none and a coin-flip classifier.

    The coin-flip reference treats each patient with probability 0.5
    independently of the outcome, so its expected net benefit is
    0.5 * prev - w * 0.5 * (1 - prev) * pt / (1 - pt).
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any((grid <= 0) | (grid >= 1)):
        raise ValueError("threshold grid must lie strictly inside (0, 1)")
    y = np.asarray(y).astype(int)
    prev = float(y.mean())
    odds = grid / (1.0 - grid)
    model = np.array([net_benefit(y, p, pt, harm_weight) for pt in grid])
    treat_all = prev - harm_weight * (1.0 - prev) * odds
    rand = 0.5 * prev - harm_weight * 0.5 * (1.0 - prev) * odds
    return NetBenefitCurve(grid, model, treat_all, np.zeros_like(grid), rand, harm_weight)
