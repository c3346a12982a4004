"""Losses and class weighting for the four-class problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyLabels, InvalidConfig, ShapeMismatch
from ..raster import NUM_CLASSES


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights; proportion and inverse modes sum to one."""

    w: np.ndarray
    mode: str

    def __post_init__(self):
        if self.w.shape != (NUM_CLASSES,):
            raise InvalidConfig(f"expected {NUM_CLASSES} weights, got {self.w.shape}")
        if (self.w < 0).any():
            raise InvalidConfig("class weights must be non-negative")


def class_weights(labels, mode: str = "inverse") -> ClassWeights:
    """Compute per-class weights from observed labels.

    ``proportion`` weights each class by its frequency n_t / n; ``inverse``
    renormalizes the reciprocal frequencies (upweighting minorities, the
    default for imbalance handling); ``uniform`` is 1/4 everywhere. Classes
    absent from ``labels`` get weight zero in the data-driven modes.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyLabels("cannot derive class weights from no labels")
    if labels.min() < 0 or labels.max() >= NUM_CLASSES:
        raise InvalidConfig("labels must lie in 0..3")
    if mode == "uniform":
        return ClassWeights(np.full(NUM_CLASSES, 1.0 / NUM_CLASSES), mode)
    counts = np.bincount(labels, minlength=NUM_CLASSES).astype(np.float64)
    if mode == "proportion":
        return ClassWeights(counts / counts.sum(), mode)
    if mode == "inverse":
        w = np.zeros(NUM_CLASSES)
        present = counts > 0
        w[present] = counts.sum() / counts[present]
        return ClassWeights(w / w.sum(), mode)
    raise InvalidConfig(f"unknown class weight mode {mode!r}")


def weighted_cross_entropy(logits: np.ndarray, targets, weights: ClassWeights):
    """Weighted cross-entropy over a batch of 4-way logits.

    Per sample the loss is -w[t] * log softmax(logits)[t]; the reported loss
    is the batch mean and the gradient is w[t] * (softmax - onehot) / N.
    Accepts a single (4,) row with a scalar target as well.
    """
    logits = np.asarray(logits, dtype=np.float64)
    squeeze = logits.ndim == 1
    if squeeze:
        logits = logits[None, :]
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if logits.shape[1] != NUM_CLASSES:
        raise ShapeMismatch(f"expected {NUM_CLASSES} logits, got {logits.shape}")
    if len(targets) != len(logits):
        raise ShapeMismatch("targets length does not match logits")
    n = len(logits)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    wt = weights.w[targets]
    loss = float(-(wt * logp[np.arange(n), targets]).mean())
    grad = np.exp(logp)
    grad[np.arange(n), targets] -= 1.0
    grad *= wt[:, None] / n
    if squeeze:
        grad = grad[0]
    return loss, grad


def mse_loss(prediction: np.ndarray, target: np.ndarray):
    """Mean squared error over all entries; gradient is 2(pred - target)/n."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ShapeMismatch(
            f"mse shapes differ: {prediction.shape} vs {target.shape}")
    diff = prediction - target
    loss = float((diff * diff).mean())
    return loss, 2.0 * diff / diff.size
