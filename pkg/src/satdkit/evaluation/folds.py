"""Stratified fold construction with tight per-fold balance guarantees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FoldPlan:
    k: int
    fold_assignments: tuple[int, ...]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if any(not 0 <= f < self.k for f in self.fold_assignments):
            raise ValueError("fold ids must lie in [0, k)")

    def test_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.fold_assignments) if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.fold_assignments) if f != fold]


def _bool_labels(dataset_or_labels) -> list[bool]:
    if hasattr(dataset_or_labels, "bool_labels"):
        return dataset_or_labels.bool_labels()
    return [bool(v) for v in dataset_or_labels]


def stratified_kfold(dataset_or_labels, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle within each class, then round-robin assignment.

    Positives fill folds 0, 1, …; negatives start at fold (P mod k) so the
    leftovers of the two classes land on different folds.  This bounds both
    the per-fold positive spread and the per-fold total spread by 1.
    """
    labels = _bool_labels(dataset_or_labels)
    pos = [i for i, l in enumerate(labels) if l]
    neg = [i for i, l in enumerate(labels) if not l]
    if k > len(pos) or k > len(neg):
        raise ValueError(
            f"k={k} too large: need at least k items of each class "
            f"(have {len(pos)} positive, {len(neg)} negative)")
    rng = np.random.default_rng(seed)
    rng.shuffle(pos)
    rng.shuffle(neg)
    assignments = [0] * len(labels)
    for j, index in enumerate(pos):
        assignments[index] = j % k
    offset = len(pos) % k
    for j, index in enumerate(neg):
        assignments[index] = (offset + j) % k
    return FoldPlan(k=k, fold_assignments=tuple(assignments))
