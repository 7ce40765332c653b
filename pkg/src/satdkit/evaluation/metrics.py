"""Confusion counts and precision/recall/F1 with explicit 0/0 conventions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalMetrics:
    precision: float
    recall: float
    f1: float

    def __post_init__(self):
        for name in ("precision", "recall", "f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def compute_metrics(c: ConfusionCounts) -> EvalMetrics:
    """precision = tp/(tp+fp), recall = tp/(tp+fn), harmonic F1; 0/0 → 0."""
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) else 0.0
    return EvalMetrics(precision=precision, recall=recall, f1=f1)


def confusion_from_predictions(true_labels, predicted) -> ConfusionCounts:
    true_arr = np.asarray(true_labels, dtype=bool)
    pred_arr = np.asarray(predicted, dtype=bool)
    if true_arr.shape != pred_arr.shape:
        raise ValueError(f"shape mismatch: {true_arr.shape} vs {pred_arr.shape}")
    return ConfusionCounts(
        tp=int(np.sum(true_arr & pred_arr)),
        fp=int(np.sum(~true_arr & pred_arr)),
        tn=int(np.sum(~true_arr & ~pred_arr)),
        fn=int(np.sum(true_arr & ~pred_arr)),
    )


def mean_metrics(items: list[EvalMetrics]) -> EvalMetrics:
    """Arithmetic mean of per-fold metric values (not pooled counts)."""
    if not items:
        raise ValueError("no metrics to average")
    return EvalMetrics(
        precision=float(np.mean([m.precision for m in items])),
        recall=float(np.mean([m.recall for m in items])),
        f1=float(np.mean([m.f1 for m in items])),
    )
