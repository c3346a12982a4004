"""The three supervised baselines: custom 2D CNN, its upgraded variant, and
a compact VGG-style network, plus their shared training entry point.

All of them consume (8, s, s) patches and emit four logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import AugmentPolicy, LabeledSet, augment, center_crop, duplicate_upsample
from .errors import EmptyData, InvalidConfig
from .nn import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2D,
    Model,
    ReLU,
    class_weights,
    train,
)
from .nn.training import TrainHistory
from .raster import MODEL_BANDS, NUM_CLASSES, Patch


@dataclass(frozen=True)
class Cnn2DConfig:
    """Shallow two-block CNN: 68 and 128 filters, 2x2 kernels and pools."""

    s: int
    filters: tuple[int, int] = (68, 128)
    kernel: int = 2
    pool: int = 2
    hidden: int = 256
    dropout: float = 0.5

    def __post_init__(self):
        if self.s < 6 or self.s % 2 != 0:
            raise InvalidConfig(f"patch side must be even and >= 6, got {self.s}")
        if min(self.filters) < 1 or self.hidden < 1:
            raise InvalidConfig("filter counts and hidden width must be positive")


@dataclass(frozen=True)
class UpgradedCnnConfig:
    """Two double-conv blocks (32, 64 filters) with pooling and dropout."""

    s: int
    hidden: int = 512
    block_dropout: float = 0.25
    head_dropout: float = 0.5

    def __post_init__(self):
        if self.s < 4 or self.s % 2 != 0:
            raise InvalidConfig(f"patch side must be even and >= 4, got {self.s}")


@dataclass(frozen=True)
class VggConfig:
    """Six-conv compact VGG with a wide dense head, kernel 2, padding 1."""

    s: int
    head_widths: tuple[int, int, int] = (4096, 1024, 128)
    dropout_first: float = 0.05
    dropout_second: float = 0.5

    def __post_init__(self):
        if self.s < 4 or self.s % 2 != 0:
            raise InvalidConfig(f"patch side must be even and >= 4, got {self.s}")


def _finish_with_head(conv_layers, head_builder, s, dtype):
    """Size the dense head from a dry shape pass over the conv stack."""
    input_shape = (MODEL_BANDS, s, s)
    (flat,) = Model(conv_layers, input_shape, dtype=dtype).output_shape
    return Model(conv_layers + head_builder(flat), input_shape, dtype=dtype)


def build_cnn2d(cfg: Cnn2DConfig, seed: int = 0, dtype=np.float64) -> Model:
    rng = np.random.default_rng(seed)
    f1, f2 = cfg.filters
    conv = [
        Conv2D(MODEL_BANDS, f1, cfg.kernel, dtype=dtype, rng=rng),
        ReLU(),
        MaxPool2D(cfg.pool),
        Conv2D(f1, f2, cfg.kernel, dtype=dtype, rng=rng),
        ReLU(),
        MaxPool2D(cfg.pool),
        Flatten(),
    ]

    def head(flat):
        return [
            Dense(flat, cfg.hidden, dtype=dtype, rng=rng),
            ReLU(),
            Dropout(cfg.dropout),
            Dense(cfg.hidden, NUM_CLASSES, dtype=dtype, rng=rng),
        ]

    return _finish_with_head(conv, head, cfg.s, dtype)


def build_upgraded_cnn(cfg: UpgradedCnnConfig, seed: int = 0, dtype=np.float64) -> Model:
    rng = np.random.default_rng(seed)
    conv = [
        Conv2D(MODEL_BANDS, 32, 3, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        Conv2D(32, 32, 3, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        MaxPool2D(2),
        Dropout(cfg.block_dropout),
        Conv2D(32, 64, 3, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        Conv2D(64, 64, 3, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        MaxPool2D(2),
        Dropout(cfg.block_dropout),
        Flatten(),
    ]

    def head(flat):
        return [
            Dense(flat, cfg.hidden, dtype=dtype, rng=rng),
            ReLU(),
            Dropout(cfg.head_dropout),
            Dense(cfg.hidden, NUM_CLASSES, dtype=dtype, rng=rng),
        ]

    return _finish_with_head(conv, head, cfg.s, dtype)


def build_vgg(cfg: VggConfig, seed: int = 0, dtype=np.float64) -> Model:
    rng = np.random.default_rng(seed)
    conv = [
        Conv2D(MODEL_BANDS, 32, 2, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        Conv2D(32, 64, 2, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        MaxPool2D(2, stride=2),
        Conv2D(64, 128, 2, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        Conv2D(128, 128, 2, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        MaxPool2D(2, stride=2),
        Conv2D(128, 256, 2, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        Conv2D(256, 256, 2, padding=1, dtype=dtype, rng=rng),
        ReLU(),
        Flatten(),
    ]
    w1, w2, w3 = cfg.head_widths

    def head(flat):
        return [
            Dense(flat, w1, dtype=dtype, rng=rng),
            ReLU(),
            Dropout(cfg.dropout_first),
            Dense(w1, w2, dtype=dtype, rng=rng),
            ReLU(),
            Dropout(cfg.dropout_second),
            Dense(w2, w3, dtype=dtype, rng=rng),
            ReLU(),
            Dense(w3, NUM_CLASSES, dtype=dtype, rng=rng),
        ]

    return _finish_with_head(conv, head, cfg.s, dtype)


def _augment_batch_fn(policy: AugmentPolicy, size: int, crop_to: int | None):
    """Batch-formation augmentation over stacked (n, 8, h, w) tensors."""

    def apply(xb, yb, rng):
        rows = []
        for row in xb:
            patch = Patch(size=size, tensor=row)
            patch = augment(patch, policy, rng)
            tensor = patch.tensor
            if crop_to is not None:
                angle = rng.uniform(-policy.rotation_degrees, policy.rotation_degrees)
                shear = rng.uniform(-policy.shear_degrees, policy.shear_degrees)
                limit = policy.shift_range * crop_to
                from .dataset import affine_center_crop
                tensor = affine_center_crop(tensor, crop_to, angle_deg=angle,
                                            shear_deg=shear,
                                            tx=rng.uniform(-limit, limit),
                                            ty=rng.uniform(-limit, limit))
                tensor = np.clip(tensor, 0.0, 1.0)
            rows.append(tensor)
        return np.stack(rows), yb

    return apply


def train_supervised(model: Model, labeled: LabeledSet, *,
                     loss_mode: str = "weighted", weight_mode: str = "inverse",
                     augment_policy: AugmentPolicy | None = None,
                     balance: str = "none", epochs: int = 100,
                     seed: int = 0, batch_size: int = 32, lr: float = 1e-3,
                     val_fraction: float = 0.1, patience: int | None = 10,
                     crop_to: int | None = None,
                     log=None) -> tuple[Model, TrainHistory]:
    """End-to-end supervised training on labeled patches.

    ``loss_mode`` picks weighted or uniform cross-entropy (weighted defaults
    to inverse-frequency weights; pass ``weight_mode="proportion"`` for the
    frequency-proportional variant). ``balance="duplicate"`` replicates each
    class round(N/n_t) times before batching. Augmentation runs at batch
    formation on training batches only; with ``crop_to`` set, patches are
    expected at double size and are affine-jittered then center-cropped.
    """
    if len(labeled) == 0:
        raise EmptyData("no labeled patches")
    if loss_mode not in ("weighted", "uniform"):
        raise InvalidConfig(f"unknown loss mode {loss_mode!r}")
    if balance not in ("none", "duplicate"):
        raise InvalidConfig(f"unknown balance mode {balance!r}")

    train_set = duplicate_upsample(labeled) if balance == "duplicate" else labeled
    x, y = train_set.to_images()
    if crop_to is not None:
        # validation/evaluation path sees plain center crops at target size
        x_eval = np.stack([center_crop(t, crop_to) for t in x])
    else:
        x_eval = x

    weights = class_weights(labeled.labels(),
                            "uniform" if loss_mode == "uniform" else weight_mode)
    augment_fn = None
    if augment_policy is not None or crop_to is not None:
        policy = augment_policy if augment_policy is not None else AugmentPolicy.disabled()
        augment_fn = _augment_batch_fn(policy, train_set.patches[0].size, crop_to)
        if crop_to is None:
            x_train_input = x
        else:
            x_train_input = x  # cropping happens inside the batch fn
    else:
        x_train_input = x_eval

    # when cropping, the model consumes crop_to-sized input; train() carves
    # validation from the arrays we hand it, so feed raw doubles only when an
    # augment_fn will crop them per batch
    if crop_to is not None and augment_fn is None:
        x_train_input = x_eval

    return _train_with_val_crop(model, x_train_input, x_eval, y, weights, epochs,
                                batch_size, lr, seed, val_fraction, patience,
                                augment_fn, log)


def _train_with_val_crop(model, x_raw, x_eval, y, weights, epochs, batch_size, lr,
                         seed, val_fraction, patience, augment_fn, log):
    """Run nn.train but validate on deterministic (cropped) views."""
    if augment_fn is None:
        return train(model, x_eval, y, loss="wce", weights=weights, epochs=epochs,
                     batch_size=batch_size, lr=lr, seed=seed,
                     val_fraction=val_fraction, patience=patience, log=log)

    n = len(x_raw)
    rng = np.random.default_rng(seed)
    n_val = int(round(val_fraction * n)) if val_fraction > 0 else 0
    if patience is not None and n_val == 0:
        raise InvalidConfig("early stopping needs a validation split")
    order = rng.permutation(n)
    val_idx, train_idx = order[:n_val], order[n_val:]

    def train_augment(xb, yb, inner_rng):
        return augment_fn(xb, yb, inner_rng)

    # train() re-splits internally; disable that by passing the split we made
    x_train, y_train = x_raw[train_idx], y[train_idx]
    x_val, y_val = x_eval[val_idx], y[val_idx]
    return _loop(model, x_train, y_train, x_val, y_val, weights, epochs,
                 batch_size, lr, rng, patience, train_augment, log)


def _loop(model, x_train, y_train, x_val, y_val, weights, epochs, batch_size, lr,
          rng, patience, augment_fn, log):
    import math

    from .nn.optim import Adam
    from .nn.losses import weighted_cross_entropy
    from .nn.training import TrainHistory, evaluate_loss

    if len(x_train) == 0:
        raise EmptyData("validation split leaves no training samples")
    optimizer = Adam(model.params(), lr=lr)
    history = TrainHistory()
    best_val, best_state, stale = math.inf, None, 0
    for epoch in range(1, epochs + 1):
        perm = rng.permutation(len(x_train))
        total, seen = 0.0, 0
        for start in range(0, len(perm), batch_size):
            take = perm[start:start + batch_size]
            xb, yb = augment_fn(x_train[take], y_train[take], rng)
            out = model.forward(xb, training=True, rng=rng)
            value, grad = weighted_cross_entropy(out, yb, weights)
            model.backward(grad)
            optimizer.step()
            total += value * len(xb)
            seen += len(xb)
        history.train_loss.append(total / seen)
        val = (evaluate_loss(model, x_val, y_val, "wce", weights)
               if len(x_val) else math.nan)
        history.val_loss.append(val)
        if log is not None:
            log.debug("epoch %d train %.6f val %.6f", epoch,
                      history.train_loss[-1], val)
        if len(x_val) and val < best_val:
            best_val, stale = val, 0
            history.best_epoch = epoch
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


def predict_labels(model: Model, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Inference-mode argmax labels for stacked patch tensors."""
    outs = [model.forward(x[i:i + batch_size], training=False)
            for i in range(0, len(x), batch_size)]
    return np.argmax(np.concatenate(outs), axis=1)


def predict_proba(model: Model, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    from .nn.losses import softmax

    outs = [model.forward(x[i:i + batch_size], training=False)
            for i in range(0, len(x), batch_size)]
    return softmax(np.concatenate(outs))
