"""Attributions for survival models: functional Shapley on the cumulative hazard and CI permutation importance."""

from dataclasses import dataclass

import numpy as np

from .._utils import derive_rng, parallel_map
from ..exceptions import AttributionError
from .metrics import concordance_index


@dataclass
class SurvivalAttribution:
    grid: np.ndarray
    values: np.ndarray  # rows x features x grid
    se: np.ndarray
    importance: np.ndarray  # per feature, trapezoid of mean |attribution|
    base: np.ndarray  # mean background CHF on the grid
    feature_names: list


def _trapezoid(y, grid):
    if len(grid) < 2:
        return y[..., 0] if len(grid) else np.zeros(y.shape[:-1])
    return np.trapezoid(y, grid, axis=-1)


def survival_shapley(model, x, background, grid=None, n_permutations=20, seed=0, n_threads=1, feature_names=None):
    """Monte-Carlo Shapley values of the predicted cumulative hazard curve.

    For each row and sampled feature ordering, features are switched from
    the background to the explained row one at a time; the change in the
    background-averaged CHF at every grid time is that feature's marginal
    contribution.  Because every ordering telescopes from the mean
    background curve to the row's curve, efficiency holds exactly and the
    Monte-Carlo error only affects how the total is shared out.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    background = np.asarray(background, dtype=float)
    if len(background) < 10:
        raise AttributionError("at least 10 background rows are required")
    grid = model.event_times_ if grid is None else np.asarray(grid, dtype=float)
    n, D = x.shape
    B = len(background)

    def one(r):
        rng = derive_rng(seed, "survshap", r)
        contrib = np.zeros((n_permutations, D, len(grid)))
        for p in range(n_permutations):
            order = rng.permutation(D)
            path = np.repeat(background[None, :, :], D + 1, axis=0)
            for k, j in enumerate(order):
                path[k + 1:, :, j] = x[r, j]
            chf = model.predict_chf(path.reshape(-1, D), grid).reshape(D + 1, B, len(grid)).mean(axis=1)
            contrib[p, order] = np.diff(chf, axis=0)
        mean = contrib.mean(axis=0)
        se = contrib.std(axis=0, ddof=1) / np.sqrt(n_permutations) if n_permutations > 1 else np.zeros_like(mean)
        return mean, se

    res = parallel_map(one, range(n), n_threads)
    values = np.stack([m for m, _ in res])
    se = np.stack([s for _, s in res])
    importance = _trapezoid(np.abs(values).mean(axis=0), grid)
    base = model.predict_chf(background, grid).mean(axis=0)
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(D)]
    return SurvivalAttribution(grid, values, se, importance, base, names)


def permutation_importance_ci(model, x, time, event, n_repeats=10, seed=0, n_threads=1):
    """Mean drop in concordance after shuffling each feature column."""
    x = np.asarray(x, dtype=float)
    base = concordance_index(model.predict_risk(x), time, event)

    def one(j):
        rng = derive_rng(seed, "perm_ci", j)
        drops = np.empty(n_repeats)
        for k in range(n_repeats):
            xp = x.copy()
            xp[:, j] = x[rng.permutation(len(x)), j]
            drops[k] = base - concordance_index(model.predict_risk(xp), time, event)
        return drops.mean()

    return np.array(parallel_map(one, range(x.shape[1]), n_threads))


def survival_attributions(model, x, background, time=None, event=None, n_permutations=20, n_repeats=10, seed=0, n_threads=1, feature_names=None, grid=None):
    """Functional Shapley attributions for the rows of ``x``.

    When ``time``/``event`` (aligned with ``x``) are given, CI permutation
    importance on the same rows is returned as well.
    """
    shap = survival_shapley(model, x, background, grid, n_permutations, seed, n_threads, feature_names)
    perm = None
    if time is not None:
        perm = permutation_importance_ci(model, x, time, event, n_repeats, seed, n_threads)
    return shap, perm
