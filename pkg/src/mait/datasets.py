"""Demo datasets written as CSV: the Wisconsin breast cancer table and seeded synthetic data."""

import csv
import re

import numpy as np

from ._utils import derive_rng


def _snake(name):
    return re.sub(r"[^0-9a-z]+", "_", name.lower()).strip("_")


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_wbc(path):
    """Diagnostic Wisconsin breast cancer data (569 rows) with ``diagnosis`` in {B, M}.

    Uses the copy bundled with scikit-learn, so no download is needed.
    Malignant (M) is the positive class.
    """
    from sklearn.datasets import load_breast_cancer

    d = load_breast_cancer()
    names = [_snake(n) for n in d.feature_names]
    # sklearn codes malignant as 0
    diag = np.where(d.target == 0, "M", "B")
    rows = [[repr(float(v)) for v in x] + [lab] for x, lab in zip(d.data, diag)]
    return _write(path, names + ["diagnosis"], rows)


def synthetic_frame(n=400, seed=0, missing_fraction=0.03):
    """Mixed-type table carrying a binary, a survival and a continuous outcome.

    Six continuous features (x1..x3 informative, x4..x6 noise, x4 correlated
    with x1), one three-level categorical ``site``, MCAR gaps in x2..x6.
    Returns ``(header, rows)`` with cells already formatted as text.
    """
    rng = derive_rng(seed, "synthetic")
    x = rng.normal(size=(n, 6))
    x[:, 3] = 0.7 * x[:, 0] + 0.3 * rng.normal(size=n)
    site = rng.choice(["A", "B", "C"], size=n, p=[0.5, 0.3, 0.2])
    site_eff = np.select([site == "B", site == "C"], [0.5, -0.5], 0.0)
    lin = 1.2 * x[:, 0] - 0.9 * x[:, 1] + 0.6 * x[:, 2] + site_eff
    p = 1.0 / (1.0 + np.exp(-(lin - 0.4)))
    label = (rng.random(n) < p).astype(int)
    # exponential event times with proportional hazards, uniform censoring
    t_event = rng.exponential(1.0 / (0.1 * np.exp(0.8 * lin)))
    t_cens = rng.uniform(0.0, 30.0, size=n)
    time = np.minimum(t_event, t_cens)
    event = (t_event <= t_cens).astype(int)
    y_cont = 2.0 * x[:, 0] + 1.0 * x[:, 1] - 1.5 * x[:, 2] + site_eff + rng.normal(scale=0.5, size=n)
    gaps = rng.random((n, 6)) < missing_fraction
    gaps[:, 0] = False
    header = [f"x{j + 1}" for j in range(6)] + ["site", "label", "time", "event", "y"]
    rows = []
    for i in range(n):
        cells = ["NA" if gaps[i, j] else repr(round(float(x[i, j]), 6)) for j in range(6)]
        cells += [site[i], str(label[i]), repr(round(float(time[i]), 6)), str(event[i]), repr(round(float(y_cont[i]), 6))]
        rows.append(cells)
    return header, rows


def write_synthetic(path, n=400, seed=0):
    return _write(path, *synthetic_frame(n, seed))


DATASETS = {"wbc": write_wbc, "synthetic": write_synthetic}
