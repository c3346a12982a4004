"""Shared classifier interface, dataset container, and checkpoint format.

Checkpoints are a versioned binary: magic ``CPCL``, u32 version, a kind tag,
a JSON metadata document, then raw little-endian float64 blobs.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BadCheckpoint, IoFailure, NonFinite, ShapeMismatch
from ..raster import NUM_CLASSES


@dataclass(frozen=True)
class EmbeddingDataset:
    """Feature matrix (n, d) with integer labels (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 2:
            raise ShapeMismatch(f"features must be 2D, got {self.x.shape}")
        if len(self.x) != len(self.y):
            raise ShapeMismatch(
                f"{len(self.x)} feature rows vs {len(self.y)} labels")
        if not np.isfinite(self.x).all():
            raise NonFinite("features contain non-finite values")

    def __len__(self):
        return len(self.x)


class ClassifierBase:
    """Common prediction API: argmax of probabilities, lowest index on ties.

    Subclasses set ``kind``, ``n_features`` and ``classes_`` (the labels seen
    during training; probability mass never leaks to unseen classes).
    """

    kind = "?"
    n_features: int
    classes_: np.ndarray

    def _check_features(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.n_features:
            raise ShapeMismatch(
                f"{self.kind} trained on {self.n_features} features, got {x.shape[1]}")
        return x

    def predict_proba(self, x) -> np.ndarray:
        raise NotImplementedError

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    # checkpoint hooks
    def to_state(self) -> tuple[dict, list[np.ndarray]]:
        raise NotImplementedError

    @classmethod
    def from_state(cls, meta: dict, blobs: list[np.ndarray]):
        raise NotImplementedError


_MAGIC = b"CPCL"
_VERSION = 1


def save_classifier(clf: ClassifierBase, path) -> None:
    meta, blobs = clf.to_state()
    head = json.dumps(meta, sort_keys=True).encode()
    kind = clf.kind.encode()
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IH", _VERSION, len(kind)))
            fh.write(kind)
            fh.write(struct.pack("<I", len(head)))
            fh.write(head)
            fh.write(struct.pack("<I", len(blobs)))
            for blob in blobs:
                arr = np.ascontiguousarray(blob, dtype="<f8")
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write classifier {path}: {exc}") from exc


def load_classifier(path) -> ClassifierBase:
    from . import boosting, forest, logreg, svm

    registry = {
        "svc-rbf": svm.SvcRbf,
        "logreg": logreg.LogisticRegression,
        "rf": forest.RandomForest,
        "adaboost": boosting.AdaBoost,
        "gbt": boosting.GradientBoostedTrees,
    }
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read classifier {path}: {exc}") from exc
    if raw[:4] != _MAGIC:
        raise BadCheckpoint(f"{path}: not a classifier checkpoint")
    version, kind_len = struct.unpack_from("<IH", raw, 4)
    if version != _VERSION:
        raise BadCheckpoint(f"{path}: unsupported version {version}")
    offset = 10
    kind = raw[offset:offset + kind_len].decode()
    offset += kind_len
    (head_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    meta = json.loads(raw[offset:offset + head_len].decode())
    offset += head_len
    (n_blobs,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    blobs = []
    for _ in range(n_blobs):
        (ndim,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if shape else 1
        blobs.append(np.frombuffer(raw, dtype="<f8", count=count,
                                   offset=offset).reshape(shape).copy())
        offset += 8 * count
    if kind not in registry:
        raise BadCheckpoint(f"{path}: unknown classifier kind {kind!r}")
    return registry[kind].from_state(meta, blobs)


def write_predictions(path, predictions: np.ndarray, probabilities: np.ndarray) -> None:
    """Export ``id,pred,p0,p1,p2,p3`` rows."""
    if probabilities.shape[1] != NUM_CLASSES:
        raise ShapeMismatch(f"expected {NUM_CLASSES} probability columns")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "pred"] + [f"p{i}" for i in range(NUM_CLASSES)])
            for i, (pred, row) in enumerate(zip(predictions, probabilities)):
                writer.writerow([i, int(pred)] + [f"{v:.10g}" for v in row])
    except OSError as exc:
        raise IoFailure(f"cannot write predictions {path}: {exc}") from exc
