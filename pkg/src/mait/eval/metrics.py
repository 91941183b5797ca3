"""Binary classification metrics at a stated probability threshold."""

import math
from dataclasses import dataclass, field

import numpy as np

from ..quality import midranks

METRIC_NAMES = (
    "auc",
    "pr_auc",
    "mcc",
    "ppv",
    "npv",
    "sensitivity",
    "specificity",
    "f1",
    "balanced_accuracy",
    "brier",
)


@dataclass
class MetricSet:
    auc: float
    pr_auc: float
    mcc: float
    ppv: float
    npv: float
    sensitivity: float
    specificity: float
    f1: float
    balanced_accuracy: float
    brier: float
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float
    flags: tuple = field(default_factory=tuple)

    def as_dict(self):
        return {name: getattr(self, name) for name in METRIC_NAMES + ("tp", "fp", "tn", "fn", "threshold")}

    @property
    def grand_score(self):
        """(MCC + AUC + PR-AUC) / 3, the model-selection score."""
        return (self.mcc + self.auc + self.pr_auc) / 3.0


def confusion_counts(y, p, threshold):
    y = np.asarray(y).astype(int)
    pred = np.asarray(p, dtype=float) >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return tp, fp, tn, fn


def roc_auc(y, p):
    """Mann-Whitney AUC with half credit for tied scores; NaN for one class."""
    y = np.asarray(y).astype(int)
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        return math.nan
    ranks = midranks(p)
    return float((ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def average_precision(y, p):
    """Step-wise sum of recall increments times precision over descending thresholds."""
    y = np.asarray(y).astype(int)
    p = np.asarray(p, dtype=float)
    n1 = int(y.sum())
    if n1 == 0 or n1 == len(y):
        return math.nan
    order = np.argsort(-p, kind="mergesort")
    ps, ys = p[order], y[order]
    tps = np.cumsum(ys)
    fps = np.cumsum(1 - ys)
    last = np.r_[np.flatnonzero(np.diff(ps) != 0), len(ps) - 1]
    tp, fp = tps[last], fps[last]
    precision = tp / (tp + fp)
    recall = tp / n1
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def compute_metrics(y, p, threshold=0.5):
    y = np.asarray(y).astype(int)
    p = np.asarray(p, dtype=float)
    if len(y) != len(p):
        raise ValueError("labels and probabilities differ in length")
    flags = []
    tp, fp, tn, fn = confusion_counts(y, p, threshold)
    sens = _ratio(tp, tp + fn, "sensitivity", flags)
    spec = _ratio(tn, tn + fp, "specificity", flags)
    ppv = _ratio(tp, tp + fp, "ppv", flags)
    npv = _ratio(tn, tn + fn, "npv", flags)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn, "f1", flags)
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        flags.append("mcc")
        mcc = 0.0
    else:
        mcc = (tp * tn - fp * fn) / math.sqrt(den)
    auc = roc_auc(y, p)
    ap = average_precision(y, p)
    if math.isnan(auc):
        flags.extend(["auc_undefined", "pr_auc_undefined"])
    brier = float(np.mean((p - y) ** 2)) if len(y) else math.nan
    return MetricSet(
        auc=auc,
        pr_auc=ap,
        mcc=mcc,
        ppv=ppv,
        npv=npv,
        sensitivity=sens,
        specificity=spec,
        f1=f1,
        balanced_accuracy=(sens + spec) / 2.0,
        brier=brier,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        threshold=float(threshold),
        flags=tuple(flags),
    )
