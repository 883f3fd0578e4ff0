"""Confusion matrix and per-class / macro F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class F1Report:
    per_class_f1: np.ndarray
    macro_f1: float
    support: np.ndarray

    @property
    def percent(self) -> str:
        return format_percent(self.macro_f1)


def format_percent(score: float) -> str:
    """F1 in [0, 1] rendered as a two-decimal percentage, e.g. ``80.76``."""
    return f"{100.0 * score:.2f}"


def confusion(y_true, y_pred, num_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"label sequences differ in shape: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("no labels to compare")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ValueError(f"{name} has labels outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def macro_f1(cm: ConfusionMatrix, average: str = "macro") -> F1Report:
    """Per-class F1 and its average over classes that have true support.

    F1 is 0 for a class whose precision and recall are both 0.  ``average`` is
    ``"macro"`` (unweighted) or ``"weighted"`` (by support).
    """
    counts = np.asarray(cm.counts, dtype=np.float64)
    if counts.sum() < 1:
        raise ValueError("empty confusion matrix")
    tp = np.diag(counts)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2.0 * precision * recall / denom, 0.0)
    present = support > 0
    if average == "macro":
        score = float(f1[present].mean())
    elif average == "weighted":
        score = float((f1 * support).sum() / support.sum())
    else:
        raise ValueError(f"unknown averaging mode {average!r}")
    return F1Report(per_class_f1=f1, macro_f1=score, support=support.astype(np.int64))
