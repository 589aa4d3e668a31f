"""Open-set evaluation metrics: O-AUROC, O-AUPR, C-ACC and their curves.

Seen test samples carry label 1, unseen label 0, and the open-set probability
is the ranking score.  The ROC curve sweeps a threshold over every distinct
score (predict seen when score >= threshold) and O-AUROC is its trapezoidal
area, which equals the pairwise statistic P(score_seen > score_unseen) with
ties counted half; a brute-force pairwise oracle is provided for
cross-validation.  O-AUPR is step-wise average precision with the seen set as
the positive class, and C-ACC is classification accuracy over the seen test
samples only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class LabeledScore:
    """One scored sample: open-set probability plus seen/unseen label.

    Class indices are optional; they are only needed for the samples entering
    the closed-set accuracy.
    """

    score: float
    is_seen: bool
    predicted_class: int | None = None
    true_class: int | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.score):
            raise DataError("scores must be finite")


@dataclass(frozen=True)
class MetricsReport:
    """Headline metrics plus the underlying curve points."""

    o_auroc: float
    o_aupr: float
    c_acc: float
    roc_points: tuple[tuple[float, float], ...]
    pr_points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.roc_points)
        if pts[0] != (0.0, 0.0) or pts[-1] != (1.0, 1.0):
            raise DataError("ROC points must start at (0,0) and end at (1,1)")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x1 < x0 or y1 < y0:
                raise DataError("ROC points must be nondecreasing")
        object.__setattr__(self, "roc_points", pts)
        object.__setattr__(
            self, "pr_points", tuple((float(x), float(y)) for x, y in self.pr_points)
        )


def _split_counts(scores: list[LabeledScore]) -> tuple[int, int]:
    pos = sum(1 for s in scores if s.is_seen)
    neg = len(scores) - pos
    if pos == 0 or neg == 0:
        raise DataError("need at least one seen and one unseen sample")
    return pos, neg


def roc_curve(scores: list[LabeledScore]) -> list[tuple[float, float]]:
    """(FPR, TPR) points from a descending threshold sweep over the scores."""
    pos, neg = _split_counts(scores)
    order = sorted(range(len(scores)), key=lambda i: -scores[i].score)
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(order):
        j = i
        # Group samples sharing a score: they enter at the same threshold.
        while j < len(order) and scores[order[j]].score == scores[order[i]].score:
            if scores[order[j]].is_seen:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / neg, tp / pos))
        i = j
    return points


def o_auroc(scores: list[LabeledScore]) -> float:
    """Trapezoidal area under the ROC curve."""
    pts = roc_curve(scores)
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def auroc_pairwise_oracle(scores: list[LabeledScore]) -> float:
    """Exhaustive O(P*N) pairwise AUROC with ties counted one half.

    Independent check for :func:`o_auroc`; kept deliberately brute force.
    """
    _split_counts(scores)
    seen = [s.score for s in scores if s.is_seen]
    unseen = [s.score for s in scores if not s.is_seen]
    total = 0.0
    for s in seen:
        for u in unseen:
            if s > u:
                total += 1.0
            elif s == u:
                total += 0.5
    return total / (len(seen) * len(unseen))


def _stable_descending(scores: list[LabeledScore]) -> list[int]:
    # Stable sort: equal scores keep their input order.
    return sorted(range(len(scores)), key=lambda i: -scores[i].score)


def o_aupr(scores: list[LabeledScore]) -> float:
    """Step-wise average precision with seen samples as positives.

    AP = sum_k (R_k - R_{k-1}) * P_k accumulated at every positive hit of the
    descending ranking (ties broken by stable input order).
    """
    pos = sum(1 for s in scores if s.is_seen)
    if pos == 0:
        raise DataError("average precision needs at least one seen sample")
    tp = 0
    ap = 0.0
    for rank, i in enumerate(_stable_descending(scores), start=1):
        if scores[i].is_seen:
            tp += 1
            ap += tp / rank
    return ap / pos


def pr_curve(scores: list[LabeledScore]) -> list[tuple[float, float]]:
    """(recall, precision) points per distinct threshold, prefixed by (0, 1)."""
    pos = sum(1 for s in scores if s.is_seen)
    if pos == 0:
        raise DataError("precision-recall curve needs at least one seen sample")
    order = _stable_descending(scores)
    points = [(0.0, 1.0)]
    tp = 0
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and scores[order[j]].score == scores[order[i]].score:
            if scores[order[j]].is_seen:
                tp += 1
            j += 1
        points.append((tp / pos, tp / j))
        i = j
    return points


def c_acc(scores: list[LabeledScore]) -> float:
    """Accuracy over seen-set samples; unseen samples are excluded."""
    seen = [s for s in scores if s.is_seen]
    if not seen:
        raise DataError("closed-set accuracy needs at least one seen sample")
    for s in seen:
        if s.predicted_class is None or s.true_class is None:
            raise DataError("seen samples need predicted and true class indices")
    hits = sum(1 for s in seen if s.predicted_class == s.true_class)
    return hits / len(seen)


def evaluate(scores: list[LabeledScore]) -> MetricsReport:
    """Compute the full report for one scored evaluation run."""
    return MetricsReport(
        o_auroc=o_auroc(scores),
        o_aupr=o_aupr(scores),
        c_acc=c_acc(scores),
        roc_points=tuple(roc_curve(scores)),
        pr_points=tuple(pr_curve(scores)),
    )
