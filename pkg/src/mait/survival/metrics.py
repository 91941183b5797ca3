"""Concordance, IPCW Brier/IBS and cumulative/dynamic AUC for survival predictions."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .nonparametric import censoring_survival, eval_survivor


def concordance_index(risk, time, event):
    """Harrell's C: pairs (i, j) with t_i < t_j and event_i are comparable.

    Returns NaN when no pair is comparable.
    """
    risk = np.asarray(risk, dtype=float)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=float)
    conc = 0.0
    n_comp = 0
    for i in np.flatnonzero(event == 1):
        later = time > time[i]
        k = int(later.sum())
        if k == 0:
            continue
        r = risk[later]
        conc += float(np.sum(r < risk[i])) + 0.5 * float(np.sum(r == risk[i]))
        n_comp += k
    return conc / n_comp if n_comp else float("nan")


@dataclass
class BrierResult:
    grid: np.ndarray
    brier: np.ndarray
    ibs: float
    truncated: bool = False
    flags: list = field(default_factory=list)


def brier_scores(surv_prob, time, event, grid, censor_time=None, censor_event=None):
    """IPCW Brier score at each grid time.

    ``surv_prob`` is rows x grid.  Events before t weigh 1/G(t_i-), rows still
    at risk weigh 1/G(t); censored-before-t rows drop out.  The censoring
    survivor is estimated on ``(censor_time, censor_event)`` which default to
    the evaluated data.
    """
    S = np.atleast_2d(np.asarray(surv_prob, dtype=float))
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=float)
    grid = np.asarray(grid, dtype=float)
    ct = time if censor_time is None else np.asarray(censor_time, dtype=float)
    ce = event if censor_event is None else np.asarray(censor_event, dtype=float)
    g_times, g_surv = censoring_survival(ct, ce)
    g_row = eval_survivor(g_times, g_surv, time, left_limit=True)
    out = np.empty(len(grid))
    n = len(time)
    for k, t in enumerate(grid):
        g_t = eval_survivor(g_times, g_surv, t)
        died = (time <= t) & (event == 1)
        alive = time > t
        total = 0.0
        ok_d = died & (g_row > 0)
        total += np.sum(S[ok_d, k] ** 2 / g_row[ok_d])
        if g_t > 0:
            total += np.sum((1.0 - S[alive, k]) ** 2) / g_t
        out[k] = total / n
    return out


def integrated_brier(surv_prob, time, event, grid, censor_time=None, censor_event=None):
    """Trapezoid average of the IPCW Brier curve over ``grid``.

    Grid points beyond the largest observed time are dropped with a warning.
    """
    grid = np.asarray(grid, dtype=float)
    S = np.atleast_2d(np.asarray(surv_prob, dtype=float))
    keep = grid <= np.max(time)
    truncated = not keep.all()
    if truncated:
        warnings.warn("integration grid extends past the last observed time; truncated", RuntimeWarning)
        grid = grid[keep]
        S = S[:, keep]
    bs = brier_scores(S, time, event, grid, censor_time, censor_event)
    if len(grid) == 1:
        ibs = float(bs[0])
    elif len(grid) == 0:
        ibs = float("nan")
    else:
        ibs = float(np.trapezoid(bs, grid) / (grid[-1] - grid[0]))
    return BrierResult(grid, bs, ibs, truncated, ["TRUNCATED"] if truncated else [])


def cumulative_dynamic_auc(risk, time, event, t_eval, censor_time=None, censor_event=None):
    """IPCW cumulative/dynamic AUC at ``t_eval``.

    Cases (event by t_eval) carry weight 1/G(t_i-); controls (still at risk
    after t_eval) weigh equally.  NaN when cases or controls are absent.
    """
    risk = np.asarray(risk, dtype=float)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=float)
    ct = time if censor_time is None else np.asarray(censor_time, dtype=float)
    ce = event if censor_event is None else np.asarray(censor_event, dtype=float)
    g_times, g_surv = censoring_survival(ct, ce)
    cases = (time <= t_eval) & (event == 1)
    controls = time > t_eval
    if not cases.any() or not controls.any():
        return float("nan")
    g = eval_survivor(g_times, g_surv, time[cases], left_limit=True)
    w = np.where(g > 0, 1.0 / np.where(g > 0, g, 1.0), 0.0)
    if w.sum() == 0:
        return float("nan")
    rc = risk[cases][:, None]
    rn = risk[controls][None, :]
    credit = (rc > rn) + 0.5 * (rc == rn)
    return float(np.sum(w[:, None] * credit) / (w.sum() * controls.sum()))
