"""Versioned binary model checkpoints.

Layout: magic ``CPNN``, u32 version, u32 header length, JSON header (dtype,
input shape, layer spec table), then little-endian float64 blobs for every
parameter and buffer in declaration order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import BadCheckpoint, IoFailure
from .layers import layer_from_spec
from .model import Model

MAGIC = b"CPNN"
VERSION = 1


def save_model(model: Model, path) -> None:
    header = {
        "version": VERSION,
        "dtype": model.dtype.name,
        "input_shape": list(model.input_shape),
        "layers": [layer.spec() for layer in model.layers],
        "param_shapes": [list(p.value.shape) for p in model.params()],
        "buffer_shapes": [list(b.shape) for b in model.buffers()],
    }
    head = json.dumps(header, sort_keys=True).encode()
    blobs = [np.ascontiguousarray(p.value, dtype="<f8").tobytes()
             for p in model.params()]
    blobs += [np.ascontiguousarray(b, dtype="<f8").tobytes()
              for b in model.buffers()]
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", VERSION, len(head)))
            fh.write(head)
            for blob in blobs:
                fh.write(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_model(path) -> Model:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:4] != MAGIC:
        raise BadCheckpoint(f"{path}: not a CPNN checkpoint")
    version, head_len = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise BadCheckpoint(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[12:12 + head_len].decode())
    dtype = np.dtype(header["dtype"])
    layers = [layer_from_spec(spec, dtype=dtype) for spec in header["layers"]]
    model = Model(layers, tuple(header["input_shape"]), dtype=dtype)

    offset = 12 + head_len
    arrays = []
    for shape in header["param_shapes"] + header["buffer_shapes"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise BadCheckpoint(f"{path}: checkpoint truncated")
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count,
                                    offset=offset).reshape(shape))
        offset = end
    params = model.params()
    if len(arrays) != len(params) + len(model.buffers()):
        raise BadCheckpoint(f"{path}: blob count mismatch")
    for p, a in zip(params, arrays[:len(params)]):
        if p.value.shape != a.shape:
            raise BadCheckpoint(f"{path}: parameter shape mismatch")
        p.value[...] = a.astype(dtype)
    for b, a in zip(model.buffers(), arrays[len(params):]):
        b[...] = a.astype(dtype)
    return model
