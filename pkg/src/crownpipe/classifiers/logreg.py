"""Multinomial logistic regression fit by full-batch gradient descent."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyData, InvalidConfig, SingleClass
from ..raster import NUM_CLASSES
from .base import ClassifierBase, EmbeddingDataset


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class LogisticRegression(ClassifierBase):
    kind = "logreg"

    def __init__(self, weight: np.ndarray, bias: np.ndarray, classes: np.ndarray,
                 l2: float):
        self.weight = weight  # (d, k) over the classes seen in training
        self.bias = bias      # (k,)
        self.classes_ = classes
        self.n_features = weight.shape[0]
        self.l2 = l2

    def predict_proba(self, x) -> np.ndarray:
        x = self._check_features(x)
        p = _softmax_rows(x @ self.weight + self.bias)
        proba = np.zeros((len(p), NUM_CLASSES))
        proba[:, self.classes_] = p
        return proba

    def loss_and_grad(self, x: np.ndarray, y_index: np.ndarray):
        """Regularized mean NLL and its gradient wrt (weight, bias).

        ``y_index`` indexes into ``classes_``, not raw label space.
        """
        n = len(x)
        p = _softmax_rows(x @ self.weight + self.bias)
        nll = -np.log(np.clip(p[np.arange(n), y_index], 1e-300, None)).mean()
        loss = nll + 0.5 * self.l2 * float((self.weight ** 2).sum())
        diff = p
        diff[np.arange(n), y_index] -= 1.0
        grad_w = x.T @ diff / n + self.l2 * self.weight
        grad_b = diff.sum(axis=0) / n
        return loss, grad_w, grad_b

    def to_state(self):
        meta = {"classes": self.classes_.tolist(), "l2": self.l2}
        return meta, [self.weight, self.bias]

    @classmethod
    def from_state(cls, meta, blobs):
        return cls(blobs[0], blobs[1],
                   np.asarray(meta["classes"], dtype=np.int64), meta["l2"])


def train_logreg(data: EmbeddingDataset, l2: float = 1e-4, epochs: int = 2000,
                 seed: int = 0, *, lr: float = 0.1,
                 grad_tol: float = 1e-6) -> LogisticRegression:
    """Full-batch gradient descent from zero weights.

    Stops when the gradient norm falls below ``grad_tol`` or at the epoch
    cap. With zero epochs the model predicts uniform probabilities over the
    classes present in training.
    """
    if l2 < 0:
        raise InvalidConfig(f"l2 must be non-negative, got {l2}")
    if len(data) == 0:
        raise EmptyData("cannot fit on no samples")
    classes = np.unique(data.y)
    if len(classes) < 2 and epochs > 0:
        raise SingleClass("logistic regression needs at least two classes")
    index_of = {int(c): i for i, c in enumerate(classes)}
    y_index = np.array([index_of[int(v)] for v in data.y])
    d, k = data.x.shape[1], len(classes)
    model = LogisticRegression(np.zeros((d, k)), np.zeros(k), classes, l2)
    for _ in range(epochs):
        _, grad_w, grad_b = model.loss_and_grad(data.x, y_index)
        norm = np.sqrt((grad_w ** 2).sum() + (grad_b ** 2).sum())
        if norm < grad_tol:
            break
        model.weight -= lr * grad_w
        model.bias -= lr * grad_b
    return model
