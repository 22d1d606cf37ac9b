"""Classification metrics and the reduced-annotation-cost measure.

The positive class is the erroneous one (label 1); with error rates below
1%, majority-class scores would be uninformative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ZeroBaselineCostError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise DimensionMismatchError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_counts(predictions, truths) -> ConfusionCounts:
    pred = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truths, dtype=np.int64)
    if pred.shape != truth.shape:
        raise DimensionMismatchError(
            f"{pred.shape} predictions vs {truth.shape} truths"
        )
    return ConfusionCounts(
        tp=int(np.sum((pred == 1) & (truth == 1))),
        fp=int(np.sum((pred == 1) & (truth == 0))),
        fn=int(np.sum((pred == 0) & (truth == 1))),
        tn=int(np.sum((pred == 0) & (truth == 0))),
    )


def precision(counts: ConfusionCounts) -> float:
    denom = counts.tp + counts.fp
    return counts.tp / denom if denom else 0.0


def recall(counts: ConfusionCounts) -> float:
    denom = counts.tp + counts.fn
    return counts.tp / denom if denom else 0.0


def f1_score(counts: ConfusionCounts) -> float:
    """Harmonic mean of precision and recall; every 0/0 resolves to 0."""
    p = precision(counts)
    r = recall(counts)
    return 2.0 * p * r / (p + r) if (p + r) else 0.0


def f1_from_predictions(predictions, truths) -> float:
    return f1_score(confusion_counts(predictions, truths))


@dataclass(frozen=True)
class CostComparison:
    """Label spend of an outlier-initialized arm vs a randomly-initialized one."""

    n_initial_outlier: int
    n_queried_outlier: int
    n_initial_random: int
    n_queried_random: int
    f1_outlier: float = 0.0
    f1_random: float = 0.0

    def __post_init__(self):
        counts = (
            self.n_initial_outlier, self.n_queried_outlier,
            self.n_initial_random, self.n_queried_random,
        )
        if min(counts) < 0:
            raise DimensionMismatchError("label counts must be non-negative")


def cost_reduced(comparison: CostComparison) -> float:
    """Relative saving in total labels, in (-inf, 1]; higher is better."""
    baseline = comparison.n_initial_random + comparison.n_queried_random
    if baseline <= 0:
        raise ZeroBaselineCostError("random-initialization arm spent no labels")
    spent = comparison.n_initial_outlier + comparison.n_queried_outlier
    return 1.0 - spent / baseline
