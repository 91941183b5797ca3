"""Nelson-Aalen and Kaplan-Meier estimators and step-function helpers."""

from dataclasses import dataclass

import numpy as np


@dataclass
class SurvivalData:
    time: np.ndarray
    event: np.ndarray
    features: np.ndarray = None

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.event = np.asarray(self.event, dtype=float)
        if len(self.time) != len(self.event):
            raise ValueError("time and event lengths differ")


@dataclass
class HazardCurve:
    time_grid: np.ndarray
    chf: np.ndarray

    def at(self, t):
        return step_interpolate(self.time_grid, self.chf, t)


def survival_target(time, event):
    """Structured array with fields ``event`` (bool) and ``time`` (float)."""
    y = np.empty(len(time), dtype=[("event", bool), ("time", float)])
    y["event"] = np.asarray(event).astype(bool)
    y["time"] = np.asarray(time, dtype=float)
    return y


def unpack_target(y, event=None):
    """Accept a structured target, a (time, event) pair or an (n, 2) array."""
    if event is not None:
        return np.asarray(y, dtype=float), np.asarray(event, dtype=float)
    if isinstance(y, SurvivalData):
        return y.time, y.event
    y = np.asarray(y)
    if y.dtype.names:
        return y["time"].astype(float), y["event"].astype(float)
    return y[:, 0].astype(float), y[:, 1].astype(float)


def step_interpolate(grid, values, t, before=0.0):
    """Right-continuous step function through ``(grid, values)`` evaluated at ``t``."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    idx = np.searchsorted(grid, np.asarray(t, dtype=float), side="right") - 1
    out = np.where(idx >= 0, values[..., np.clip(idx, 0, max(len(grid) - 1, 0))] if len(grid) else before, before)
    return out


def risk_table(time, event, weights=None):
    """Distinct event times with event counts and at-risk totals."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=float)
    w = np.ones_like(time) if weights is None else np.asarray(weights, dtype=float)
    ev_times = np.unique(time[event == 1])
    order = np.argsort(time)
    ts, ws = time[order], w[order]
    # at risk at t: weight with time >= t
    tail = np.concatenate([np.cumsum(ws[::-1])[::-1], [0.0]])
    at_risk = tail[np.searchsorted(ts, ev_times, side="left")]
    d = np.array([w[(time == t) & (event == 1)].sum() for t in ev_times])
    return ev_times, d, at_risk


def nelson_aalen(d, event=None, weights=None):
    """Cumulative hazard H(t) = sum over event times t_i <= t of d_i / n_i.

    ``d`` is a :class:`SurvivalData` or a time vector (with ``event``).
    """
    time, ev = (d.time, d.event) if isinstance(d, SurvivalData) else (d, event)
    ev_times, dd, at_risk = risk_table(time, ev, weights)
    return HazardCurve(ev_times, np.cumsum(dd / at_risk))


def kaplan_meier(time, event, weights=None):
    ev_times, dd, at_risk = risk_table(time, event, weights)
    return ev_times, np.cumprod(1.0 - dd / at_risk)


def censoring_survival(time, event):
    """Kaplan-Meier estimate of the censoring survivor G(t) (indicators flipped)."""
    return kaplan_meier(time, 1.0 - np.asarray(event, dtype=float))


def eval_survivor(times, surv, t, left_limit=False):
    """Evaluate a KM step survivor at ``t`` (optionally its left limit)."""
    side = "left" if left_limit else "right"
    idx = np.searchsorted(times, np.asarray(t, dtype=float), side=side) - 1
    return np.where(idx >= 0, surv[np.clip(idx, 0, max(len(surv) - 1, 0))] if len(surv) else 1.0, 1.0)
