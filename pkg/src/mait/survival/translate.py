"""Translate predicted cumulative hazard curves into binary outcomes.

Each test curve is assigned to whichever class-median training curve is
nearer in Euclidean distance on a shared event-time grid.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import TranslationError


@dataclass
class ClassMedianCurves:
    time_grid: np.ndarray
    event_median: np.ndarray
    free_median: np.ndarray
    n_event: int
    n_free: int


@dataclass
class TranslationResult:
    predicted: np.ndarray
    dist_event: np.ndarray
    dist_free: np.ndarray
    medians: ClassMedianCurves


def horizon_labels(time, event, horizon):
    """Binary outcome at ``horizon`` and whether it is actually observed.

    label 1: event at or before the horizon.  A row is observed when its
    label is 1 or its follow-up reaches the horizon; rows censored earlier
    have unknown status.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=float)
    labels = ((event == 1) & (time <= horizon)).astype(int)
    observed = (labels == 1) | (time >= horizon)
    return labels, observed


def translation_grid(time, event, horizon):
    time = np.asarray(time, dtype=float)
    grid = np.unique(time[(np.asarray(event) == 1) & (time <= horizon)])
    if len(grid) == 0:
        raise TranslationError("no training events within the horizon")
    return grid


def class_median_curves(train_curves, labels, observed, grid):
    curves = np.asarray(train_curves, dtype=float)
    labels = np.asarray(labels)
    observed = np.asarray(observed, dtype=bool)
    ev = observed & (labels == 1)
    free = observed & (labels == 0)
    if not ev.any() or not free.any():
        raise TranslationError("both outcome classes need at least one eligible training row")
    return ClassMedianCurves(
        np.asarray(grid, dtype=float),
        np.median(curves[ev], axis=0),
        np.median(curves[free], axis=0),
        int(ev.sum()),
        int(free.sum()),
    )


def chf_to_binary(train_curves, train_labels, train_observed, test_curves, grid):
    """Nearest class-median assignment; exact distance ties go to the event class.

    All curves are rows on ``grid``.
    """
    medians = class_median_curves(train_curves, train_labels, train_observed, grid)
    test = np.atleast_2d(np.asarray(test_curves, dtype=float))
    d_event = np.sqrt(np.sum((test - medians.event_median) ** 2, axis=1))
    d_free = np.sqrt(np.sum((test - medians.free_median) ** 2, axis=1))
    pred = (d_event <= d_free).astype(int)
    return TranslationResult(pred, d_event, d_free, medians)
