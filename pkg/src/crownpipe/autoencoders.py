"""Convolutional and fully-connected autoencoders over normalized patches.

Both families train with MSE on unlabeled patches; the encoder half then
compresses labeled patches into length-b embeddings for the classical
classifiers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import UnlabeledSet
from .errors import EmptyData, InvalidConfig, IoFailure, ShapeMismatch
from .nn import (
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    MaxPool2D,
    Model,
    ReLU,
    Sigmoid,
    train,
)
from .nn.training import TrainHistory, evaluate_loss
from .raster import MODEL_BANDS


@dataclass(frozen=True)
class CaeConfig:
    """Convolutional autoencoder geometry for one (s, b) grid cell."""

    s: int
    b: int
    conv_filters: tuple[int, int] = (60, 200)
    kernel: int = 3
    pool: int = 2
    dense_hidden: int | None = None  # defaults to 2*b

    def __post_init__(self):
        if self.b < 1:
            raise InvalidConfig(f"bottleneck must be positive, got {self.b}")
        if self.s < 4 or self.s % 2 != 0:
            raise InvalidConfig(f"patch side must be even and >= 4, got {self.s}")
        if min(self.conv_filters) < 1 or self.kernel < 1 or self.pool < 1:
            raise InvalidConfig("conv filter counts, kernel and pool must be positive")

    @property
    def hidden(self) -> int:
        return self.dense_hidden if self.dense_hidden is not None else 2 * self.b

    @property
    def input_size(self) -> int:
        return MODEL_BANDS * self.s * self.s


def sae_hidden_width(input_size: int, b: int) -> int:
    """round(0.5 * (input_size + b)), half up."""
    return (input_size + b + 1) // 2


@dataclass(frozen=True)
class SaeConfig:
    """Fully-connected autoencoder: widths [in, h, b, h, in], h = round((in+b)/2)."""

    s: int
    b: int
    with_coords: bool = False

    def __post_init__(self):
        if self.b < 1:
            raise InvalidConfig(f"bottleneck must be positive, got {self.b}")
        if self.s < 2 or self.s % 2 != 0:
            raise InvalidConfig(f"patch side must be even and >= 2, got {self.s}")

    @property
    def input_size(self) -> int:
        return MODEL_BANDS * self.s * self.s + (2 if self.with_coords else 0)

    @property
    def hidden(self) -> int:
        return sae_hidden_width(self.input_size, self.b)

    @property
    def widths(self) -> tuple[int, int, int, int, int]:
        return (self.input_size, self.hidden, self.b, self.hidden, self.input_size)


@dataclass
class Autoencoder:
    """A trained (or trainable) autoencoder plus its encoder half.

    ``full`` and ``encoder`` share layer objects, so training the full model
    also trains the encoder.
    """

    full: Model
    encoder: Model
    bottleneck: int
    input_kind: str  # "image" or "vector"
    with_coords: bool = False


def build_cae(cfg: CaeConfig, seed: int = 0, dtype=np.float64) -> Autoencoder:
    """Two conv blocks then two dense layers down to b; mirrored dense decoder."""
    rng = np.random.default_rng(seed)
    f1, f2 = cfg.conv_filters
    k, p = cfg.kernel, cfg.kernel // 2
    input_shape = (MODEL_BANDS, cfg.s, cfg.s)
    enc = [
        Conv2D(MODEL_BANDS, f1, k, padding=p, dtype=dtype, rng=rng),
        BatchNorm(f1, dtype=dtype),
        ReLU(),
        MaxPool2D(cfg.pool),
        Conv2D(f1, f2, k, padding=p, dtype=dtype, rng=rng),
        BatchNorm(f2, dtype=dtype),
        ReLU(),
        MaxPool2D(cfg.pool),
        Flatten(),
    ]
    # flatten width comes from a dry shape pass, never from assumed arithmetic
    (flat,) = Model(enc, input_shape, dtype=dtype).output_shape
    enc += [
        Dense(flat, cfg.hidden, dtype=dtype, rng=rng),
        BatchNorm(cfg.hidden, dtype=dtype),
        ReLU(),
        Dense(cfg.hidden, cfg.b, dtype=dtype, rng=rng),
    ]
    dec = [
        Dense(cfg.b, cfg.hidden, dtype=dtype, rng=rng),
        BatchNorm(cfg.hidden, dtype=dtype),
        ReLU(),
        Dense(cfg.hidden, cfg.input_size, dtype=dtype, rng=rng),
        Sigmoid(),
    ]
    full = Model(enc + dec, input_shape, dtype=dtype)
    encoder = Model(enc, input_shape, dtype=dtype)
    return Autoencoder(full=full, encoder=encoder, bottleneck=cfg.b,
                       input_kind="image")


def build_sae(cfg: SaeConfig, seed: int = 0, dtype=np.float64) -> Autoencoder:
    """Three hidden dense layers, bottleneck in the middle, sigmoid output."""
    rng = np.random.default_rng(seed)
    w = cfg.widths
    enc = [
        Dense(w[0], w[1], dtype=dtype, rng=rng),
        ReLU(),
        Dense(w[1], w[2], dtype=dtype, rng=rng),
        ReLU(),
    ]
    dec = [
        Dense(w[2], w[3], dtype=dtype, rng=rng),
        ReLU(),
        Dense(w[3], w[4], dtype=dtype, rng=rng),
        Sigmoid(),
    ]
    input_shape = (cfg.input_size,)
    full = Model(enc + dec, input_shape, dtype=dtype)
    encoder = Model(enc, input_shape, dtype=dtype)
    return Autoencoder(full=full, encoder=encoder, bottleneck=cfg.b,
                       input_kind="vector", with_coords=cfg.with_coords)


def _ae_inputs(ae: Autoencoder, patches) -> np.ndarray:
    if len(patches) == 0:
        raise EmptyData("no patches given")
    if ae.input_kind == "image":
        x = np.stack([p.tensor for p in patches])
    else:
        rows = []
        for p in patches:
            flat = p.tensor.ravel()
            if ae.with_coords:
                if p.coords is None:
                    raise ShapeMismatch("model expects coordinates, patch has none")
                flat = np.concatenate([flat, np.asarray(p.coords)])
            rows.append(flat)
        x = np.stack(rows)
    if x.shape[1:] != ae.full.input_shape:
        raise ShapeMismatch(
            f"patches of shape {x.shape[1:]} do not match model "
            f"input {ae.full.input_shape}")
    return x


def _ae_targets(ae: Autoencoder, x: np.ndarray) -> np.ndarray:
    return x.reshape(len(x), -1) if ae.input_kind == "image" else x


def train_ae(ae: Autoencoder, unlabeled: UnlabeledSet, epochs: int, seed: int = 0,
             *, batch_size: int = 64, lr: float = 1e-3,
             holdout_fraction: float = 0.1, patience: int | None = None,
             log=None) -> tuple[Autoencoder, TrainHistory]:
    """MSE-train on unlabeled patches; history tracks train and held-out MSE."""
    x = _ae_inputs(ae, unlabeled.patches)
    y = _ae_targets(ae, x)
    _, history = train(ae.full, x, y, loss="mse", epochs=epochs,
                       batch_size=batch_size, lr=lr, seed=seed,
                       val_fraction=holdout_fraction, patience=patience, log=log)
    return ae, history


def evaluate_mse(ae: Autoencoder, patches) -> float:
    """Inference-mode reconstruction MSE over a patch list."""
    x = _ae_inputs(ae, patches)
    return evaluate_loss(ae.full, x, _ae_targets(ae, x), loss="mse")


def encode(ae: Autoencoder, patches, batch_size: int = 256) -> np.ndarray:
    """Deterministic (n, b) embedding matrix; row i belongs to patches[i]."""
    x = _ae_inputs(ae, patches)
    chunks = [ae.encoder.forward(x[i:i + batch_size], training=False)
              for i in range(0, len(x), batch_size)]
    emb = np.concatenate(chunks)
    if emb.shape != (len(patches), ae.bottleneck):
        raise ShapeMismatch(f"unexpected embedding shape {emb.shape}")
    return emb


def reconstruct(ae: Autoencoder, patch) -> np.ndarray:
    """Run one patch through the full autoencoder; output matches input shape."""
    x = _ae_inputs(ae, [patch])
    out = ae.full.forward(x, training=False)[0]
    if ae.input_kind == "image":
        return out.reshape(patch.tensor.shape)
    return out


# --- embedding CSV interchange ------------------------------------------------


def write_embeddings(path, embeddings: np.ndarray, coords=None, labels=None) -> None:
    """CSV with header ``id,e0..e{b-1}[,x,y][,label]``."""
    b = embeddings.shape[1]
    header = ["id"] + [f"e{i}" for i in range(b)]
    if coords is not None:
        header += ["x", "y"]
    if labels is not None:
        header += ["label"]
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i, row in enumerate(embeddings):
                record = [str(i)] + [f"{v:.10g}" for v in row]
                if coords is not None:
                    record += [f"{coords[i][0]:.10g}", f"{coords[i][1]:.10g}"]
                if labels is not None:
                    record += [str(int(labels[i]))]
                writer.writerow(record)
    except OSError as exc:
        raise IoFailure(f"cannot write embeddings {path}: {exc}") from exc


def read_embeddings(path):
    """Inverse of :func:`write_embeddings`; returns (embeddings, coords, labels)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
    except OSError as exc:
        raise IoFailure(f"cannot read embeddings {path}: {exc}") from exc
    if not header or header[0] != "id":
        raise InvalidConfig(f"{path}: not an embedding CSV")
    has_label = header[-1] == "label"
    has_coords = "x" in header
    b = len(header) - 1 - (2 if has_coords else 0) - (1 if has_label else 0)
    emb = np.array([[float(v) for v in row[1:1 + b]] for row in rows])
    coords = None
    if has_coords:
        cx = header.index("x")
        coords = np.array([[float(row[cx]), float(row[cx + 1])] for row in rows])
    labels = None
    if has_label:
        labels = np.array([int(row[-1]) for row in rows], dtype=np.int64)
    return emb, coords, labels
