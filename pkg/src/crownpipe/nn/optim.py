"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .layers import Param


class Adam:
    """Standard Adam over a fixed parameter list.

    Moment accumulators mirror each parameter's shape; the step counter is
    incremented before bias correction, so the very first unit-gradient step
    moves a parameter by almost exactly -lr.
    """

    def __init__(self, params: list[Param], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g.shape != p.value.shape:
                raise ShapeMismatch(
                    f"gradient shape {g.shape} != parameter shape {p.value.shape}")
            self.m[i] += (1.0 - self.beta1) * (g - self.m[i])
            self.v[i] += (1.0 - self.beta2) * (g * g - self.v[i])
            m_hat = self.m[i] / b1c
            v_hat = self.v[i] / b2c
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = np.zeros_like(p.value)
