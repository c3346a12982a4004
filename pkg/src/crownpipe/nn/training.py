"""Seeded minibatch training loop with early stopping on validation loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyData, InvalidConfig
from .losses import ClassWeights, mse_loss, weighted_cross_entropy
from .model import Model
from .optim import Adam


@dataclass
class TrainHistory:
    """Per-epoch train/validation losses and where training stopped."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int | None = None
    stopped_epoch: int = 0

    def epochs_run(self) -> int:
        return len(self.train_loss)

    def write_csv(self, path) -> None:
        lines = ["epoch,train_loss,val_loss"]
        for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss), start=1):
            va_txt = "" if math.isnan(va) else f"{va:.9g}"
            lines.append(f"{i},{tr:.9g},{va_txt}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _batch_loss(model: Model, xb, yb, loss: str, weights: ClassWeights | None,
                training: bool, rng):
    out = model.forward(xb, training=training, rng=rng)
    if loss == "mse":
        return mse_loss(out, yb)
    if loss == "wce":
        return weighted_cross_entropy(out, yb, weights)
    raise InvalidConfig(f"unknown loss {loss!r}")


def evaluate_loss(model: Model, x, y, loss: str = "mse",
                  weights: ClassWeights | None = None,
                  batch_size: int = 256) -> float:
    """Inference-mode mean loss over a dataset."""
    total, n = 0.0, len(x)
    if n == 0:
        raise EmptyData("cannot evaluate on an empty set")
    for i in range(0, n, batch_size):
        xb, yb = x[i:i + batch_size], y[i:i + batch_size]
        value, _ = _batch_loss(model, xb, yb, loss, weights, False, None)
        total += value * len(xb)
    return total / n


def train(model: Model, x: np.ndarray, y: np.ndarray, *, loss: str = "mse",
          weights: ClassWeights | None = None, epochs: int = 100,
          batch_size: int = 32, lr: float = 1e-3, seed: int = 0,
          val_fraction: float = 0.1, patience: int | None = 10,
          augment_fn=None, log=None):
    """Train with Adam; return ``(model, history)``.

    A ``val_fraction`` slice is carved off (seeded) for validation. When
    ``patience`` is set, training stops after that many epochs without a new
    validation-loss minimum and the best-epoch parameters are restored.
    ``augment_fn(xb, yb, rng) -> (xb, yb)`` runs at batch formation on
    training batches only.
    """
    n = len(x)
    if n == 0:
        raise EmptyData("no training samples")
    if patience is not None and patience < 1:
        raise InvalidConfig(f"patience must be >= 1, got {patience}")

    rng = np.random.default_rng(seed)
    n_val = int(round(val_fraction * n)) if val_fraction > 0 else 0
    if patience is not None and n_val == 0:
        raise InvalidConfig("early stopping needs a validation split")
    order = rng.permutation(n)
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise EmptyData("validation split leaves no training samples")
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    optimizer = Adam(model.params(), lr=lr)
    history = TrainHistory()
    best_val = math.inf
    best_state = None
    stale = 0

    for epoch in range(1, epochs + 1):
        perm = rng.permutation(len(x_train))
        epoch_loss, seen = 0.0, 0
        for start in range(0, len(perm), batch_size):
            take = perm[start:start + batch_size]
            xb, yb = x_train[take], y_train[take]
            if augment_fn is not None:
                xb, yb = augment_fn(xb, yb, rng)
            value, grad = _batch_loss(model, xb, yb, loss, weights, True, rng)
            model.backward(grad)
            optimizer.step()
            epoch_loss += value * len(xb)
            seen += len(xb)
        history.train_loss.append(epoch_loss / seen)

        if n_val:
            val = evaluate_loss(model, x_val, y_val, loss, weights)
        else:
            val = math.nan
        history.val_loss.append(val)
        if log is not None:
            log.debug("epoch %d train %.6f val %.6f", epoch, history.train_loss[-1], val)

        if n_val and val < best_val:
            best_val = val
            history.best_epoch = epoch
            stale = 0
            if patience is not None:
                best_state = model.get_state()
        else:
            stale += 1
        history.stopped_epoch = epoch
        if patience is not None and stale >= patience:
            break

    if best_state is not None:
        model.set_state(best_state)
    return model, history
