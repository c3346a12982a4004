"""Evaluation metrics: confusion counts, accuracies, macro-F1, ROC/AUC.

Per-class accuracy is recall (diagonal over row sum); classes absent from
the true labels report NaN and stay out of macro averages. AUC is the
Mann-Whitney rank statistic with ties counted half.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, LengthMismatch, ShapeMismatch
from .raster import NUM_CLASSES


def confusion(true_labels, predicted, n_classes: int = NUM_CLASSES) -> np.ndarray:
    """Count matrix with rows = true class, columns = predicted class."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if len(true_labels) != len(predicted):
        raise LengthMismatch(
            f"{len(true_labels)} true labels vs {len(predicted)} predictions")
    if len(true_labels) == 0:
        raise EmptyMatrix("no samples to count")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (true_labels, predicted), 1)
    return cm


def _check_cm(cm: np.ndarray) -> np.ndarray:
    cm = np.asarray(cm)
    if cm.size == 0 or cm.sum() == 0:
        raise EmptyMatrix("confusion matrix is empty")
    return cm


def accuracy(cm: np.ndarray) -> float:
    cm = _check_cm(cm)
    return float(np.trace(cm) / cm.sum())


def per_class_accuracy(cm: np.ndarray) -> np.ndarray:
    """Diagonal over row sums; NaN where a class never occurs."""
    cm = _check_cm(cm)
    row = cm.sum(axis=1).astype(np.float64)
    out = np.full(len(cm), np.nan)
    present = row > 0
    out[present] = np.diag(cm)[present] / row[present]
    return out


def f1_macro(cm: np.ndarray) -> float:
    """Unweighted mean F1 over the classes present in the true labels."""
    cm = _check_cm(cm)
    diag = np.diag(cm).astype(np.float64)
    row = cm.sum(axis=1).astype(np.float64)   # support (recall denominator)
    col = cm.sum(axis=0).astype(np.float64)   # predictions (precision denominator)
    scores = []
    for c in range(len(cm)):
        if row[c] == 0:
            continue
        precision = diag[c] / col[c] if col[c] > 0 else 0.0
        recall = diag[c] / row[c]
        if precision + recall == 0:
            scores.append(0.0)
        else:
            scores.append(2.0 * precision * recall / (precision + recall))
    return float(np.mean(scores))


def _rank_average_ties(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc_ovr(true_labels, probabilities) -> np.ndarray:
    """Per-class one-vs-rest AUC via the rank statistic; NaN when undefined."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim != 2 or probabilities.shape[1] != NUM_CLASSES:
        raise ShapeMismatch(f"expected (n, {NUM_CLASSES}) probabilities")
    if len(true_labels) != len(probabilities):
        raise LengthMismatch("labels and probabilities differ in length")
    aucs = np.full(NUM_CLASSES, np.nan)
    for c in range(NUM_CLASSES):
        pos = true_labels == c
        n_pos = int(pos.sum())
        n_neg = len(pos) - n_pos
        if n_pos == 0 or n_neg == 0:
            continue  # AUC undefined for this class
        ranks = _rank_average_ties(probabilities[:, c])
        rank_sum = ranks[pos].sum()
        aucs[c] = (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return aucs


def roc_points(true_binary, scores):
    """ROC staircase as (fpr, tpr) arrays, from (0,0) to (1,1)."""
    true_binary = np.asarray(true_binary, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if len(true_binary) != len(scores):
        raise LengthMismatch("labels and scores differ in length")
    order = np.argsort(-scores, kind="stable")
    sorted_true = true_binary[order]
    sorted_scores = scores[order]
    tp = np.cumsum(sorted_true)
    fp = np.cumsum(~sorted_true)
    # keep only the last point of each tied-score run
    keep = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    tp, fp = tp[keep], fp[keep]
    n_pos = max(int(true_binary.sum()), 1)
    n_neg = max(int((~true_binary).sum()), 1)
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    return fpr, tpr


@dataclass(frozen=True)
class ScoreReport:
    """The quantities reported per evaluated model."""

    overall_accuracy: float
    per_class_accuracy: tuple
    f1_macro: float
    per_class_auc: tuple

    @classmethod
    def from_predictions(cls, true_labels, predicted, probabilities=None):
        cm = confusion(true_labels, predicted)
        aucs = (roc_auc_ovr(true_labels, probabilities)
                if probabilities is not None else np.full(NUM_CLASSES, np.nan))
        return cls(
            overall_accuracy=accuracy(cm),
            per_class_accuracy=tuple(per_class_accuracy(cm)),
            f1_macro=f1_macro(cm),
            per_class_auc=tuple(aucs),
        )

    def to_json(self) -> str:
        def clean(v):
            return None if (isinstance(v, float) and math.isnan(v)) else v

        return json.dumps({
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": [clean(v) for v in self.per_class_accuracy],
            "f1_macro": self.f1_macro,
            "per_class_auc": [clean(v) for v in self.per_class_auc],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScoreReport":
        d = json.loads(text)

        def restore(values):
            return tuple(math.nan if v is None else v for v in values)

        return cls(
            overall_accuracy=d["overall_accuracy"],
            per_class_accuracy=restore(d["per_class_accuracy"]),
            f1_macro=d["f1_macro"],
            per_class_auc=restore(d["per_class_auc"]),
        )
