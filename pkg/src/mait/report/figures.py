"""SVG figures drawn with matplotlib's object API (no pyplot state, safe off the main thread)."""

import io
import re

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from ..eval.metrics import confusion_counts

_RC = {"svg.hashsalt": "mait", "svg.fonttype": "none", "font.size": 9}


def _svg(fig):
    buf = io.StringIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None}, bbox_inches="tight")
    return buf.getvalue()


def _new(width=5.0, height=3.6):
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(width, height))
        ax = fig.add_subplot(1, 1, 1)
    return fig, ax


def inline_svg(svg):
    """Strip the XML prolog, DOCTYPE, metadata and namespace URIs for embedding in HTML."""
    svg = re.sub(r"<\?xml[^>]*\?>\s*", "", svg)
    svg = re.sub(r"<!DOCTYPE[^>]*>\s*", "", svg)
    svg = re.sub(r"<metadata>.*?</metadata>\s*", "", svg, flags=re.S)
    svg = re.sub(r'\s+xmlns(:\w+)?="[^"]*"', "", svg)
    return svg.strip()


def roc_figure(y, p, title="ROC curve"):
    y = np.asarray(y).astype(int)
    p = np.asarray(p, dtype=float)
    thr = np.r_[np.inf, np.unique(p)[::-1]]
    pos, neg = max(y.sum(), 1), max((1 - y).sum(), 1)
    tpr = [np.sum((p >= t) & (y == 1)) / pos for t in thr]
    fpr = [np.sum((p >= t) & (y == 0)) / neg for t in thr]
    fig, ax = _new(4.2, 4.0)
    ax.plot(fpr, tpr, drawstyle="steps-post", label="model")
    ax.plot([0, 1], [0, 1], linestyle="--", color="grey", label="chance")
    ax.set_xlabel("False positive rate (1 - specificity)")
    ax.set_ylabel("True positive rate (sensitivity)")
    ax.set_title(title)
    ax.legend(loc="lower right")
    return _svg(fig)


def pr_figure(y, p, title="Precision-recall curve"):
    y = np.asarray(y).astype(int)
    p = np.asarray(p, dtype=float)
    thr = np.unique(p)[::-1]
    rec, prec = [], []
    for t in thr:
        tp, fp, _, fn = confusion_counts(y, p, t)
        rec.append(tp / max(tp + fn, 1))
        prec.append(tp / max(tp + fp, 1))
    fig, ax = _new(4.2, 4.0)
    ax.plot(rec, prec, drawstyle="steps-post")
    ax.axhline(y.mean(), linestyle="--", color="grey", label="prevalence")
    ax.set_xlabel("Recall (sensitivity)")
    ax.set_ylabel("Precision (PPV)")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.legend(loc="lower left")
    return _svg(fig)


def confusion_figure(tp, fp, tn, fn, title="Confusion matrix"):
    m = np.array([[tn, fp], [fn, tp]])
    fig, ax = _new(3.4, 3.2)
    # pcolormesh keeps the cells as vector paths (imshow would embed a raster)
    ax.pcolormesh(np.arange(3) - 0.5, np.arange(3) - 0.5, m, cmap="Blues")
    ax.invert_yaxis()
    for i in range(2):
        for j in range(2):
            ax.text(j, i, str(int(m[i, j])), ha="center", va="center", color="black")
    ax.set_xticks([0, 1], ["predicted 0", "predicted 1"])
    ax.set_yticks([0, 1], ["observed 0", "observed 1"])
    ax.set_title(title)
    return _svg(fig)


def heatmap_figure(names, matrix, title="Spearman correlation", label="Spearman rho"):
    k = len(names)
    size = min(3.0 + 0.18 * k, 9.0)
    fig, ax = _new(size + 1.0, size)
    edges = np.arange(k + 1) - 0.5
    im = ax.pcolormesh(edges, edges, np.nan_to_num(np.asarray(matrix, dtype=float)), cmap="RdBu_r", vmin=-1, vmax=1)
    ax.set_aspect("equal")
    ax.invert_yaxis()
    ax.set_xticks(range(k), names, rotation=90, fontsize=6)
    ax.set_yticks(range(k), names, fontsize=6)
    cb = fig.colorbar(im, ax=ax, label=label)
    cb.solids.set_rasterized(False)
    ax.set_title(title)
    return _svg(fig)


def bar_figure(names, values, xlabel, title, errors=None):
    order = np.argsort(-np.asarray(values, dtype=float), kind="stable")
    names = [names[i] for i in order]
    values = np.asarray(values, dtype=float)[order]
    fig, ax = _new(5.5, max(2.0, 0.22 * len(names) + 1.0))
    ax.barh(range(len(names)), values[::-1], xerr=None if errors is None else np.asarray(errors)[order][::-1])
    ax.set_yticks(range(len(names)), names[::-1], fontsize=7)
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    return _svg(fig)


def line_figure(series, xlabel, ylabel, title, steps=False, ylim=None, identity=False):
    """``series`` is a list of (label, x, y)."""
    fig, ax = _new()
    for label, x, y in series:
        ax.plot(x, y, label=label, drawstyle="steps-post" if steps else "default")
    if identity:
        ax.plot([0, 1], [0, 1], linestyle="--", color="grey", label="ideal")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if ylim is not None:
        ax.set_ylim(*ylim)
    ax.set_title(title)
    ax.legend(fontsize=7)
    return _svg(fig)


def scatter_figure(x, y, xlabel, ylabel, title):
    fig, ax = _new(4.2, 4.0)
    ax.scatter(x, y, s=8)
    lo, hi = float(min(np.min(x), np.min(y))), float(max(np.max(x), np.max(y)))
    ax.plot([lo, hi], [lo, hi], linestyle="--", color="grey")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _svg(fig)
