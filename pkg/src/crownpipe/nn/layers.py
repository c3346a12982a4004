"""Layers of the sequential network engine.

Vector features flow as (N, F) arrays, images as (N, C, H, W). Every layer
caches what its backward pass needs during a training-mode forward; calling
``backward`` without a preceding forward raises :class:`NoForwardState`.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import InvalidConfig, NoForwardState, ShapeMismatch


class Param:
    """One trainable array with its gradient slot."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value: np.ndarray, name: str = ""):
        self.value = value
        self.grad = np.zeros_like(value)
        self.name = name


def _xavier(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    kind = "layer"

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[Param]:
        return []

    def buffers(self) -> list[np.ndarray]:
        return []

    def out_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def spec(self) -> dict:
        return {"kind": self.kind}

    def _need_cache(self, cache):
        if cache is None:
            raise NoForwardState(f"{self.kind}: backward called before forward")
        return cache


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, out_features: int, *, dtype=np.float64,
                 rng: np.random.Generator | None = None):
        if in_features < 1 or out_features < 1:
            raise InvalidConfig("dense layer dimensions must be positive")
        rng = rng or np.random.default_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Param(
            _xavier(rng, (in_features, out_features), in_features, out_features, dtype),
            "dense.weight")
        self.bias = Param(np.zeros(out_features, dtype=dtype), "dense.bias")
        self._x = None

    def forward(self, x, training=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(
                f"dense expects (N, {self.in_features}), got {x.shape}")
        self._x = x if training else None
        return x @ self.weight.value + self.bias.value

    def backward(self, dout):
        x = self._need_cache(self._x)
        self.weight.grad = x.T @ dout
        self.bias.grad = dout.sum(axis=0)
        return dout @ self.weight.value.T

    def params(self):
        return [self.weight, self.bias]

    def out_shape(self, in_shape):
        if in_shape != (self.in_features,):
            raise InvalidConfig(f"dense expects ({self.in_features},), got {in_shape}")
        return (self.out_features,)

    def spec(self):
        return {"kind": self.kind, "in_features": self.in_features,
                "out_features": self.out_features}


def _pool_windows(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    sn, sc, sh, sw = x.strides
    return as_strided(x, shape=(n, c, oh, ow, k, k),
                      strides=(sn, sc, sh * stride, sw * stride, sh, sw))


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int, *,
                 stride: int = 1, padding: int = 0, dtype=np.float64,
                 rng: np.random.Generator | None = None):
        if min(in_channels, out_channels, kernel, stride) < 1 or padding < 0:
            raise InvalidConfig("conv2d hyperparameters must be positive")
        rng = rng or np.random.default_rng(0)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel * kernel
        fan_out = out_channels * kernel * kernel
        self.weight = Param(
            _xavier(rng, (out_channels, in_channels, kernel, kernel), fan_in, fan_out, dtype),
            "conv2d.weight")
        self.bias = Param(np.zeros(out_channels, dtype=dtype), "conv2d.bias")
        self._cols = None
        self._in_spatial = None

    def _check_input(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(
                f"conv2d expects (N, {self.in_channels}, H, W), got {x.shape}")

    def forward(self, x, training=False, rng=None):
        self._check_input(x)
        k, s, p = self.kernel, self.stride, self.padding
        if p:
            x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        n, c, h, w = x.shape
        if h < k or w < k:
            raise ShapeMismatch(f"conv2d input {h}x{w} smaller than kernel {k}")
        oh = (h - k) // s + 1
        ow = (w - k) // s + 1
        windows = _pool_windows(np.ascontiguousarray(x), k, s)
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * k * k)
        wmat = self.weight.value.reshape(self.out_channels, -1)
        out = cols @ wmat.T + self.bias.value
        if training:
            self._cols = cols
            self._in_spatial = (n, h, w, oh, ow)
        else:
            self._cols = None
        return out.reshape(n, oh, ow, self.out_channels).transpose(0, 3, 1, 2)

    def backward(self, dout):
        cols = self._need_cache(self._cols)
        n, h, w, oh, ow = self._in_spatial
        k, s, p = self.kernel, self.stride, self.padding
        c = self.in_channels
        dmat = dout.transpose(0, 2, 3, 1).reshape(n * oh * ow, self.out_channels)
        self.weight.grad = (dmat.T @ cols).reshape(self.weight.value.shape)
        self.bias.grad = dmat.sum(axis=0)
        dcols = (dmat @ self.weight.value.reshape(self.out_channels, -1))
        dcols = dcols.reshape(n, oh, ow, c, k, k).transpose(0, 3, 4, 5, 1, 2)
        dx = np.zeros((n, c, h, w), dtype=dout.dtype)
        for ki in range(k):
            for kj in range(k):
                dx[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s] += dcols[:, :, ki, kj]
        if p:
            dx = dx[:, :, p:h - p, p:w - p]
        return dx

    def params(self):
        return [self.weight, self.bias]

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise InvalidConfig(
                f"conv2d expects ({self.in_channels}, H, W), got {in_shape}")
        _, h, w = in_shape
        oh = (h + 2 * self.padding - self.kernel) // self.stride + 1
        ow = (w + 2 * self.padding - self.kernel) // self.stride + 1
        if oh < 1 or ow < 1:
            raise InvalidConfig(f"conv2d output collapses for input {in_shape}")
        return (self.out_channels, oh, ow)

    def spec(self):
        return {"kind": self.kind, "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel": self.kernel,
                "stride": self.stride, "padding": self.padding}


class MaxPool2D(Layer):
    kind = "maxpool2d"

    def __init__(self, kernel: int, stride: int | None = None):
        if kernel < 1:
            raise InvalidConfig("pool kernel must be positive")
        self.kernel = kernel
        self.stride = stride if stride is not None else kernel
        self._cache = None

    def forward(self, x, training=False, rng=None):
        if x.ndim != 4:
            raise ShapeMismatch(f"maxpool2d expects (N, C, H, W), got {x.shape}")
        k, s = self.kernel, self.stride
        n, c, h, w = x.shape
        if h < k or w < k:
            raise ShapeMismatch(f"maxpool2d input {h}x{w} smaller than kernel {k}")
        windows = _pool_windows(np.ascontiguousarray(x), k, s)
        flat = windows.reshape(*windows.shape[:4], k * k)
        amax = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, amax[..., None], axis=-1)[..., 0]
        if training:
            self._cache = (amax, x.shape)
        else:
            self._cache = None
        return out

    def backward(self, dout):
        amax, in_shape = self._need_cache(self._cache)
        k, s = self.kernel, self.stride
        n, c, h, w = in_shape
        oh, ow = amax.shape[2], amax.shape[3]
        dx = np.zeros(in_shape, dtype=dout.dtype)
        ni, ci, oi, oj = np.indices(amax.shape)
        rows = oi * s + amax // k
        cols = oj * s + amax % k
        np.add.at(dx, (ni, ci, rows, cols), dout)
        return dx

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise InvalidConfig(f"maxpool2d expects (C, H, W), got {in_shape}")
        c, h, w = in_shape
        oh = (h - self.kernel) // self.stride + 1
        ow = (w - self.kernel) // self.stride + 1
        if oh < 1 or ow < 1:
            raise InvalidConfig(f"maxpool2d output collapses for input {in_shape}")
        return (c, oh, ow)

    def spec(self):
        return {"kind": self.kind, "kernel": self.kernel, "stride": self.stride}


class BatchNorm(Layer):
    """Batch normalization over (N,) or (N, H, W) statistics per feature.

    Training mode normalizes with biased batch statistics and maintains
    running estimates (unbiased variance) for inference.
    """

    kind = "batchnorm"

    def __init__(self, num_features: int, *, eps: float = 1e-5,
                 momentum: float = 0.1, dtype=np.float64):
        if num_features < 1:
            raise InvalidConfig("batchnorm feature count must be positive")
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.gamma = Param(np.ones(num_features, dtype=dtype), "batchnorm.gamma")
        self.beta = Param(np.zeros(num_features, dtype=dtype), "batchnorm.beta")
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)
        self._cache = None

    def _axes_and_view(self, x):
        if x.ndim == 2:
            if x.shape[1] != self.num_features:
                raise ShapeMismatch(
                    f"batchnorm expects (N, {self.num_features}), got {x.shape}")
            return (0,), (1, -1)
        if x.ndim == 4:
            if x.shape[1] != self.num_features:
                raise ShapeMismatch(
                    f"batchnorm expects (N, {self.num_features}, H, W), got {x.shape}")
            return (0, 2, 3), (1, -1, 1, 1)
        raise ShapeMismatch(f"batchnorm expects 2D or 4D input, got {x.shape}")

    def forward(self, x, training=False, rng=None):
        axes, view = self._axes_and_view(x)
        g = self.gamma.value.reshape(view)
        b = self.beta.value.reshape(view)
        if not training:
            mean = self.running_mean.reshape(view)
            var = self.running_var.reshape(view)
            self._cache = None
            return g * (x - mean) / np.sqrt(var + self.eps) + b
        mean = x.mean(axis=axes, keepdims=True)
        var = x.var(axis=axes, keepdims=True)
        ivar = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * ivar
        n = x.size // self.num_features
        unbiased = var * (n / max(n - 1, 1))
        self.running_mean += self.momentum * (mean.reshape(-1) - self.running_mean)
        self.running_var += self.momentum * (unbiased.reshape(-1) - self.running_var)
        self._cache = (xhat, ivar, axes, view, n)
        return g * xhat + b

    def backward(self, dout):
        xhat, ivar, axes, view, n = self._need_cache(self._cache)
        self.gamma.grad = (dout * xhat).sum(axis=axes)
        self.beta.grad = dout.sum(axis=axes)
        dxhat = dout * self.gamma.value.reshape(view)
        term = (n * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
        return ivar / n * term

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return [self.running_mean, self.running_var]

    def out_shape(self, in_shape):
        if in_shape[0] != self.num_features:
            raise InvalidConfig(
                f"batchnorm expects feature count {self.num_features}, got {in_shape}")
        return in_shape

    def spec(self):
        return {"kind": self.kind, "num_features": self.num_features,
                "eps": self.eps, "momentum": self.momentum}


class ReLU(Layer):
    kind = "relu"

    def __init__(self):
        self._mask = None

    def forward(self, x, training=False, rng=None):
        mask = x > 0
        self._mask = mask if training else None
        return x * mask

    def backward(self, dout):
        return dout * self._need_cache(self._mask)

    def out_shape(self, in_shape):
        return in_shape


class Sigmoid(Layer):
    kind = "sigmoid"

    def __init__(self):
        self._out = None

    def forward(self, x, training=False, rng=None):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._out = out if training else None
        return out

    def backward(self, dout):
        out = self._need_cache(self._out)
        return dout * out * (1.0 - out)

    def out_shape(self, in_shape):
        return in_shape


class Dropout(Layer):
    """Inverted dropout: inference is a pure pass-through."""

    kind = "dropout"

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise InvalidConfig(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self._mask = None

    def forward(self, x, training=False, rng=None):
        if not training or self.p == 0.0:
            self._mask = np.ones((), dtype=x.dtype) if training else None
            return x
        if rng is None:
            raise InvalidConfig("dropout in training mode needs an RNG")
        mask = (rng.random(x.shape) >= self.p).astype(x.dtype) / (1.0 - self.p)
        self._mask = mask
        return x * mask

    def backward(self, dout):
        return dout * self._need_cache(self._mask)

    def out_shape(self, in_shape):
        return in_shape

    def spec(self):
        return {"kind": self.kind, "p": self.p}


class Flatten(Layer):
    kind = "flatten"

    def __init__(self):
        self._in_shape = None

    def forward(self, x, training=False, rng=None):
        self._in_shape = x.shape if training else None
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._need_cache(self._in_shape))

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


_KINDS = {
    "dense": Dense, "conv2d": Conv2D, "maxpool2d": MaxPool2D,
    "batchnorm": BatchNorm, "relu": ReLU, "sigmoid": Sigmoid,
    "dropout": Dropout, "flatten": Flatten,
}


def layer_from_spec(spec: dict, dtype=np.float64) -> Layer:
    """Rebuild a layer from its ``spec()`` dictionary (weights not restored)."""
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    kind = spec.get("kind")
    if kind not in _KINDS:
        raise InvalidConfig(f"unknown layer kind {kind!r}")
    cls = _KINDS[kind]
    if kind in ("dense", "conv2d", "batchnorm"):
        kwargs["dtype"] = dtype
    return cls(**kwargs)
