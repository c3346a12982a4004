"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidConfig
from .layers import Dropout
from .losses import ClassWeights, mse_loss, weighted_cross_entropy
from .model import Model


def _loss_value(model: Model, x, target, loss, weights, rng):
    out = model.forward(x, training=True, rng=rng)
    if loss == "mse":
        return mse_loss(out, target)
    if loss == "wce":
        return weighted_cross_entropy(out, target, weights)
    raise InvalidConfig(f"unknown loss {loss!r}")


def grad_check(model: Model, x: np.ndarray, *, eps: float = 1e-4,
               loss: str = "mse", target=None, weights: ClassWeights | None = None,
               seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per entry is |a - n| / max(|a|, |n|, 1e-8). Dropout is
    forced off for the duration so repeated forwards are deterministic;
    intended for small float64 models (cost is O(P) forward passes).
    """
    rng = np.random.default_rng(seed)
    if target is None:
        out = model.forward(x, training=False)
        if loss == "mse":
            target = rng.standard_normal(out.shape)
        else:
            target = rng.integers(0, out.shape[1], size=len(out))
    if loss == "wce" and weights is None:
        weights = ClassWeights(np.full(4, 0.25), "uniform")

    dropouts = [l for l in model.layers if isinstance(l, Dropout)]
    saved_p = [l.p for l in dropouts]
    for layer in dropouts:
        layer.p = 0.0
    saved_state = model.get_state()
    try:
        value, grad = _loss_value(model, x, target, loss, weights, rng)
        model.backward(grad)
        analytic = [p.grad.copy() for p in model.params()]

        worst = 0.0
        for param, a in zip(model.params(), analytic):
            flat = param.value.reshape(-1)
            aflat = a.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up, _ = _loss_value(model, x, target, loss, weights, rng)
                flat[i] = orig - eps
                down, _ = _loss_value(model, x, target, loss, weights, rng)
                flat[i] = orig
                numeric = (up - down) / (2.0 * eps)
                denom = max(abs(aflat[i]), abs(numeric), 1e-8)
                worst = max(worst, abs(aflat[i] - numeric) / denom)
    finally:
        for layer, p in zip(dropouts, saved_p):
            layer.p = p
        model.set_state(saved_state)
    return worst
