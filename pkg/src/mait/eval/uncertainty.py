"""Discarding predictions that sit near chance with weak attributions."""

from dataclasses import dataclass

import numpy as np

from .._utils import linear_quantile


@dataclass
class UncertaintyResult:
    kept: np.ndarray
    discarded: np.ndarray
    reasons: dict
    l1_cutoff: float


def uncertainty_filter(p, shap_values, prob_band=0.1, shap_quantile=0.10, combine="and"):
    """Drop rows with |p - 0.5| <= prob_band and a small attribution L1 norm.

    ``combine="or"`` discards a row when either condition holds.
    """
    p = np.asarray(p, dtype=float)
    values = getattr(shap_values, "values", shap_values)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != len(p):
        raise ValueError("attribution rows do not align with probabilities")
    l1 = np.abs(values).sum(axis=1)
    cutoff = float(linear_quantile(l1, shap_quantile)) if len(l1) else 0.0
    near_chance = np.abs(p - 0.5) <= prob_band
    weak = l1 <= cutoff
    drop = near_chance & weak if combine == "and" else near_chance | weak
    reasons = {}
    for i in np.flatnonzero(drop):
        why = []
        if near_chance[i]:
            why.append(f"|p-0.5|={abs(p[i] - 0.5):.4g}<={prob_band}")
        if weak[i]:
            why.append(f"attribution L1={l1[i]:.4g}<=q{shap_quantile}={cutoff:.4g}")
        reasons[int(i)] = "; ".join(why)
    return UncertaintyResult(np.flatnonzero(~drop), np.flatnonzero(drop), reasons, cutoff)
