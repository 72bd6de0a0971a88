"""Confusion matrices and binary detection scores.

The positive class is ``fake`` (label 1). A score whose denominator is zero is
undefined and comes back as ``None``, never 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAKE = 1
REAL = 0


def confusion(predictions, labels, k: int) -> np.ndarray:
    """K x K counts, rows = actual label, columns = prediction."""
    p = np.asarray(predictions).ravel()
    y = np.asarray(labels).ravel()
    if p.shape != y.shape:
        raise ValueError(f"predictions ({p.size}) and labels ({y.size}) differ in length")
    if k < 1:
        raise ValueError(f"class count must be positive, got {k}")
    for name, v in (("prediction", p), ("label", y)):
        if v.size and (not np.issubdtype(v.dtype, np.integer) and np.any(v != np.round(v))):
            raise ValueError(f"{name}s must be integers")
        bad = (v < 0) | (v >= k)
        if np.any(bad):
            raise ValueError(f"{name} {v[bad][0]} outside [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (y.astype(np.int64), p.astype(np.int64)), 1)
    return cm


@dataclass(frozen=True)
class Scores:
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None

    def as_tuple(self) -> tuple:
        return (self.precision, self.recall, self.f1, self.accuracy)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def metrics(cm, positive: int = FAKE) -> Scores:
    cm = np.asarray(cm)
    if cm.shape != (2, 2):
        raise ValueError(f"binary scores need a 2x2 confusion matrix, got {cm.shape}")
    if positive not in (0, 1):
        raise ValueError(f"positive class must be 0 or 1, got {positive}")
    neg = 1 - positive
    tp, fn = int(cm[positive, positive]), int(cm[positive, neg])
    fp, tn = int(cm[neg, positive]), int(cm[neg, neg])
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Scores(precision, recall, f1, _ratio(tp + tn, tp + tn + fp + fn))
