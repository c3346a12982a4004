"""Sequential layer stack with forward/backward and state snapshots."""

from __future__ import annotations

import numpy as np

from ..errors import NoForwardState, ShapeMismatch
from .layers import Layer, Param


class Model:
    """A fixed sequence of layers over a declared input shape.

    The model is mutable while training (parameters, batchnorm buffers,
    layer caches); once training finishes it can be shared read-only for
    inference.
    """

    def __init__(self, layers: list[Layer], input_shape: tuple, dtype=np.float64):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        self._forwarded = False
        # validates layer-to-layer compatibility at build time
        self.infer_shapes()

    def infer_shapes(self) -> list[tuple]:
        """Dry shape pass: per-layer output shapes, without touching data."""
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.out_shape(shapes[-1]))
        return shapes

    @property
    def output_shape(self) -> tuple:
        return self.infer_shapes()[-1]

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(
                f"model expects (N, {', '.join(map(str, self.input_shape))}), "
                f"got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        self._forwarded = training
        return x

    def backward(self, dloss: np.ndarray) -> np.ndarray:
        if not self._forwarded:
            raise NoForwardState("backward called before a training-mode forward")
        d = np.asarray(dloss, dtype=self.dtype)
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def params(self) -> list[Param]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def buffers(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.buffers())
        return out

    def num_params(self) -> int:
        return sum(p.value.size for p in self.params())

    def get_state(self) -> list[np.ndarray]:
        """Deep copy of all parameters and buffers, for best-epoch restores."""
        return [p.value.copy() for p in self.params()] + \
               [b.copy() for b in self.buffers()]

    def set_state(self, state: list[np.ndarray]) -> None:
        params = self.params()
        buffers = self.buffers()
        if len(state) != len(params) + len(buffers):
            raise ShapeMismatch("state length does not match model")
        for p, v in zip(params, state[:len(params)]):
            p.value[...] = v
        for b, v in zip(buffers, state[len(params):]):
            b[...] = v
