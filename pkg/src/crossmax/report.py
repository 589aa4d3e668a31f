"""Static SVG figures for evaluation reports.

All figures are written through a fixed SVG hash salt and without a creation
date, so re-running a report produces byte-identical files.
"""

from __future__ import annotations

import numpy as np
import matplotlib
from matplotlib.figure import Figure

from .errors import DataError

_SVG_RC = {"svg.hashsalt": "crossmax"}


def _save(fig: Figure, path) -> None:
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})


def save_probability_histogram(
    path, seen_scores, unseen_scores, bins: int = 20, title: str = "open-set probability"
) -> None:
    """Overlaid score histograms for the in- and out-of-distribution sets.

    An empty unseen set is allowed; the figure then shows one population.
    """
    seen_scores = np.asarray(seen_scores, dtype=np.float64)
    unseen_scores = np.asarray(unseen_scores, dtype=np.float64)
    if seen_scores.size == 0 and unseen_scores.size == 0:
        raise DataError("histogram needs at least one score")
    fig = Figure(figsize=(5.0, 3.2))
    ax = fig.add_subplot()
    edges = np.linspace(0.0, 1.0, bins + 1)
    if seen_scores.size:
        ax.hist(seen_scores, bins=edges, alpha=0.6, label="in-distribution")
    if unseen_scores.size:
        ax.hist(unseen_scores, bins=edges, alpha=0.6, label="out-of-distribution")
    ax.set_xlabel("open-set probability")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend(loc="upper center")
    fig.tight_layout()
    _save(fig, path)


def save_curve(path, points, kind: str, title: str = "") -> None:
    """Plot a ROC (``kind='roc'``) or precision-recall (``kind='pr'``) curve."""
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise DataError("curve needs at least one point")
    xs, ys = zip(*pts)
    if kind == "roc":
        labels = ("false positive rate", "true positive rate")
    elif kind == "pr":
        labels = ("recall", "precision")
    else:
        raise DataError(f"unknown curve kind {kind!r}")
    fig = Figure(figsize=(4.0, 4.0))
    ax = fig.add_subplot()
    ax.plot(xs, ys, marker=".", linewidth=1.2)
    if kind == "roc":
        ax.plot([0, 1], [0, 1], linestyle="--", linewidth=0.8, color="gray")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_title(title or kind.upper())
    fig.tight_layout()
    _save(fig, path)


def save_radar(path, series: dict, run_labels, title: str = "") -> None:
    """Radar chart of per-run metric values, one polygon per series.

    With fewer than three runs a plain line plot is drawn instead (a radar
    degenerates below three axes).
    """
    run_labels = [str(r) for r in run_labels]
    n = len(run_labels)
    if n == 0 or not series:
        raise DataError("radar chart needs runs and at least one series")
    for name, values in series.items():
        if len(values) != n:
            raise DataError(f"series {name!r} does not match the run count")
    fig = Figure(figsize=(4.6, 4.2))
    if n < 3:
        ax = fig.add_subplot()
        for name, values in series.items():
            ax.plot(range(n), values, marker="o", label=name)
        ax.set_xticks(range(n))
        ax.set_xticklabels(run_labels)
    else:
        ax = fig.add_subplot(projection="polar")
        angles = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        closed = np.concatenate([angles, angles[:1]])
        for name, values in series.items():
            vals = np.asarray(list(values), dtype=np.float64)
            loop = np.concatenate([vals, vals[:1]])
            ax.plot(closed, loop, marker="o", linewidth=1.2, label=name)
        ax.set_xticks(angles)
        ax.set_xticklabels(run_labels)
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    _save(fig, path)
