"""RBF-kernel support vector classifier solved by SMO, one-vs-rest multiclass."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyData, InvalidConfig, NonFinite, SingleClass
from ..raster import NUM_CLASSES
from .base import ClassifierBase, EmbeddingDataset


def rbf_kernel(x1: np.ndarray, x2: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        (x1 * x1).sum(axis=1)[:, None]
        + (x2 * x2).sum(axis=1)[None, :]
        - 2.0 * (x1 @ x2.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


class _Smo:
    """Platt's sequential minimal optimization over a precomputed kernel.

    Decision values follow f(x) = sum_j alpha_j y_j K(x_j, x) + b; the error
    cache holds f(x_i) - y_i for every training point.
    """

    def __init__(self, kernel: np.ndarray, y: np.ndarray, c: float, tol: float,
                 rng: np.random.Generator, max_passes: int = 10_000):
        self.k = kernel
        self.y = y.astype(np.float64)
        self.c = c
        self.tol = tol
        self.rng = rng
        self.max_passes = max_passes
        n = len(y)
        self.alpha = np.zeros(n)
        self.b = 0.0
        self.err = -self.y.copy()
        self._eps = 1e-8

    def solve(self):
        n = len(self.y)
        examine_all = True
        num_changed = 1
        passes = 0
        while (num_changed > 0 or examine_all) and passes < self.max_passes:
            num_changed = 0
            if examine_all:
                targets = range(n)
            else:
                targets = np.flatnonzero(
                    (self.alpha > self._eps) & (self.alpha < self.c - self._eps))
            for i2 in targets:
                num_changed += self._examine(int(i2))
            if examine_all:
                examine_all = False
            elif num_changed == 0:
                examine_all = True
            passes += 1
        return self.alpha, self.b

    def _examine(self, i2: int) -> int:
        y2, a2, e2 = self.y[i2], self.alpha[i2], self.err[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.c) or (r2 > self.tol and a2 > 0)):
            return 0
        non_bound = np.flatnonzero(
            (self.alpha > self._eps) & (self.alpha < self.c - self._eps))
        if len(non_bound) > 1:
            i1 = int(non_bound[np.argmax(np.abs(self.err[non_bound] - e2))])
            if self._take_step(i1, i2):
                return 1
        if len(non_bound):
            start = self.rng.integers(len(non_bound))
            for i1 in np.roll(non_bound, -start):
                if self._take_step(int(i1), i2):
                    return 1
        start = self.rng.integers(len(self.y))
        for i1 in np.roll(np.arange(len(self.y)), -start):
            if self._take_step(int(i1), i2):
                return 1
        return 0

    def _take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1o, a2o = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.err[i1], self.err[i2]
        s = y1 * y2
        if s < 0:
            low, high = max(0.0, a2o - a1o), min(self.c, self.c + a2o - a1o)
        else:
            low, high = max(0.0, a1o + a2o - self.c), min(self.c, a1o + a2o)
        if high - low < self._eps:
            return False
        k11, k12, k22 = self.k[i1, i1], self.k[i1, i2], self.k[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2 = np.clip(a2o + y2 * (e1 - e2) / eta, low, high)
        else:
            # flat or concave direction: evaluate the dual at both endpoints
            g1 = e1 + y1 - self.b
            g2 = e2 + y2 - self.b
            v1 = g1 - a1o * y1 * k11 - a2o * y2 * k12
            v2 = g2 - a1o * y1 * k12 - a2o * y2 * k22
            gamma = a1o + s * a2o

            def objective(a2v):
                a1v = gamma - s * a2v
                return (0.5 * k11 * a1v * a1v + 0.5 * k22 * a2v * a2v
                        + s * k12 * a1v * a2v + y1 * a1v * v1 + y2 * a2v * v2
                        - a1v - a2v)

            obj_low, obj_high = objective(low), objective(high)
            if obj_low < obj_high - self._eps:
                a2 = low
            elif obj_high < obj_low - self._eps:
                a2 = high
            else:
                return False
        if abs(a2 - a2o) < self._eps * (a2 + a2o + self._eps):
            return False
        a1 = np.clip(a1o + s * (a2o - a2), 0.0, self.c)

        d1, d2 = y1 * (a1 - a1o), y2 * (a2 - a2o)
        b1 = self.b - e1 - d1 * k11 - d2 * k12
        b2 = self.b - e2 - d1 * k12 - d2 * k22
        if self._eps < a1 < self.c - self._eps:
            b_new = b1
        elif self._eps < a2 < self.c - self._eps:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.err += d1 * self.k[i1] + d2 * self.k[i2] + (b_new - self.b)
        self.alpha[i1], self.alpha[i2], self.b = a1, a2, b_new
        return True


class SvcRbf(ClassifierBase):
    kind = "svc-rbf"

    def __init__(self, machines: list[dict], gamma: float, classes: np.ndarray,
                 n_features: int):
        self.machines = machines  # per class: support vectors, dual coefs, bias
        self.gamma = gamma
        self.classes_ = classes
        self.n_features = n_features

    def decision_function(self, x) -> np.ndarray:
        """One margin column per training class, in ``classes_`` order."""
        x = self._check_features(x)
        margins = np.empty((len(x), len(self.machines)))
        for j, m in enumerate(self.machines):
            k = rbf_kernel(x, m["sv"], self.gamma)
            margins[:, j] = k @ m["coef"] + m["bias"]
        return margins

    def predict_proba(self, x) -> np.ndarray:
        # softmax over margins: uncalibrated scores, ranking-faithful only
        margins = self.decision_function(x)
        z = margins - margins.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        proba = np.zeros((len(p), NUM_CLASSES))
        proba[:, self.classes_] = p
        return proba

    def predict(self, x) -> np.ndarray:
        margins = self.decision_function(x)
        return self.classes_[np.argmax(margins, axis=1)]

    def to_state(self):
        meta = {"gamma": self.gamma, "classes": self.classes_.tolist(),
                "n_features": self.n_features,
                "biases": [m["bias"] for m in self.machines]}
        blobs = []
        for m in self.machines:
            blobs.append(m["sv"])
            blobs.append(m["coef"])
        return meta, blobs

    @classmethod
    def from_state(cls, meta, blobs):
        machines = []
        for j, bias in enumerate(meta["biases"]):
            machines.append({"sv": blobs[2 * j], "coef": blobs[2 * j + 1],
                             "bias": float(bias)})
        return cls(machines, meta["gamma"],
                   np.asarray(meta["classes"], dtype=np.int64), meta["n_features"])


def train_svc_rbf(data: EmbeddingDataset, c: float = 1.0, gamma="scale",
                  seed: int = 0, *, tol: float = 1e-3) -> SvcRbf:
    """One-vs-rest binary SVMs solved by SMO to the KKT tolerance.

    ``gamma="scale"`` resolves to 1 / (n_features * var(features)). The
    kernel matrix is computed once and shared across the per-class machines.
    """
    if len(data) == 0:
        raise EmptyData("cannot fit on no samples")
    if c <= 0:
        raise InvalidConfig(f"C must be positive, got {c}")
    classes = np.unique(data.y)
    if len(classes) < 2:
        raise SingleClass("SVC needs at least two classes")
    if gamma == "scale":
        var = float(data.x.var())
        gamma = 1.0 / (data.x.shape[1] * var) if var > 0 else 1.0
    if not np.isfinite(gamma) or gamma <= 0:
        raise NonFinite(f"gamma must be positive and finite, got {gamma}")

    kernel = rbf_kernel(data.x, data.x, gamma)
    machines = []
    for j, cls_id in enumerate(classes):
        y = np.where(data.y == cls_id, 1.0, -1.0)
        rng = np.random.default_rng(np.random.SeedSequence([seed, j]))
        alpha, bias = _Smo(kernel, y, c, tol, rng).solve()
        support = alpha > 1e-12
        machines.append({
            "sv": data.x[support].copy(),
            "coef": (alpha * y)[support],
            "bias": bias,
        })
    return SvcRbf(machines, gamma, classes, data.x.shape[1])
