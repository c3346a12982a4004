"""Decision-tree building blocks: Gini classification trees and
second-order regression trees for boosting.

Split finding is exact: every feature is scanned in sorted order with
cumulative statistics, thresholds sit at midpoints between distinct
neighbors. Ties go to the earliest feature and lowest threshold so results
are deterministic.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyData
from ..raster import NUM_CLASSES


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature=None, threshold=None, left=None, right=None, value=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value  # leaf payload: class distribution or scalar score

    @property
    def is_leaf(self):
        return self.value is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            value = self.value.tolist() if isinstance(self.value, np.ndarray) else self.value
            return {"value": value}
        return {"feature": int(self.feature), "threshold": float(self.threshold),
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "_Node":
        if "value" in d:
            value = d["value"]
            if isinstance(value, list):
                value = np.asarray(value, dtype=np.float64)
            return cls(value=value)
        return cls(feature=d["feature"], threshold=d["threshold"],
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


def _descend(node: _Node, x: np.ndarray):
    while not node.is_leaf:
        node = node.left if x[node.feature] < node.threshold else node.right
    return node.value


def _gini_best_split(xf: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Best (gain, threshold) for one feature column, or None."""
    order = np.argsort(xf, kind="stable")
    xs, ys, ws = xf[order], y[order], w[order]
    onehot = np.zeros((len(ys), NUM_CLASSES))
    onehot[np.arange(len(ys)), ys] = ws
    left = np.cumsum(onehot, axis=0)         # class mass left of each cut
    total = left[-1]
    total_w = total.sum()
    if total_w <= 0:
        return None
    cuts = np.flatnonzero(xs[:-1] < xs[1:])  # split between distinct values
    if len(cuts) == 0:
        return None
    lw = left[cuts].sum(axis=1)
    rw = total_w - lw
    gini_l = 1.0 - ((left[cuts] / lw[:, None]) ** 2).sum(axis=1)
    gini_r = 1.0 - (((total - left[cuts]) / rw[:, None]) ** 2).sum(axis=1)
    parent = 1.0 - ((total / total_w) ** 2).sum()
    gains = parent - (lw * gini_l + rw * gini_r) / total_w
    best = int(np.argmax(gains))
    threshold = 0.5 * (xs[cuts[best]] + xs[cuts[best] + 1])
    return float(gains[best]), float(threshold)


class DecisionTree:
    """Gini-split classification tree with optional feature subsampling.

    ``max_features`` limits the candidate features per node ("sqrt" or an
    int); sample weights steer both splits and leaf votes.
    """

    def __init__(self, max_depth: int = 10, max_features=None,
                 min_samples_split: int = 2,
                 rng: np.random.Generator | None = None):
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_split = min_samples_split
        self.rng = rng or np.random.default_rng(0)
        self.root: _Node | None = None
        self.n_features = 0

    def _n_candidates(self, d: int) -> int:
        if self.max_features is None:
            return d
        if self.max_features == "sqrt":
            return max(1, int(round(np.sqrt(d))))
        return min(d, int(self.max_features))

    def fit(self, x: np.ndarray, y: np.ndarray, sample_weight=None) -> "DecisionTree":
        if len(x) == 0:
            raise EmptyData("cannot fit a tree on no samples")
        w = (np.ones(len(x)) if sample_weight is None
             else np.asarray(sample_weight, dtype=np.float64))
        self.n_features = x.shape[1]
        self.root = self._grow(x, np.asarray(y, dtype=np.int64), w, depth=0)
        return self

    def _leaf(self, y, w) -> _Node:
        dist = np.zeros(NUM_CLASSES)
        np.add.at(dist, y, w)
        total = dist.sum()
        if total > 0:
            dist /= total
        return _Node(value=dist)

    def _grow(self, x, y, w, depth) -> _Node:
        if (depth >= self.max_depth or len(y) < self.min_samples_split
                or len(np.unique(y)) == 1):
            return self._leaf(y, w)
        d = x.shape[1]
        k = self._n_candidates(d)
        features = np.sort(self.rng.choice(d, size=k, replace=False)) if k < d \
            else np.arange(d)
        best = None
        for f in features:
            found = _gini_best_split(x[:, f], y, w)
            if found is None:
                continue
            gain, threshold = found
            if best is None or gain > best[0] + 1e-15:
                best = (gain, int(f), threshold)
        if best is None or best[0] <= 1e-15:
            return self._leaf(y, w)
        _, f, threshold = best
        mask = x[:, f] < threshold
        return _Node(feature=f, threshold=threshold,
                     left=self._grow(x[mask], y[mask], w[mask], depth + 1),
                     right=self._grow(x[~mask], y[~mask], w[~mask], depth + 1))

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return np.stack([_descend(self.root, row) for row in x])

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "max_depth": self.max_depth,
                "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        tree = cls(max_depth=d["max_depth"])
        tree.n_features = d["n_features"]
        tree.root = _Node.from_dict(d["root"])
        return tree


def _newton_best_split(xf, g, h, lam):
    """Best (gain, threshold) for one feature under second-order loss."""
    order = np.argsort(xf, kind="stable")
    xs, gs, hs = xf[order], g[order], h[order]
    gl = np.cumsum(gs)
    hl = np.cumsum(hs)
    gt, ht = gl[-1], hl[-1]
    cuts = np.flatnonzero(xs[:-1] < xs[1:])
    if len(cuts) == 0:
        return None
    gl, hl = gl[cuts], hl[cuts]
    gain = 0.5 * (gl ** 2 / (hl + lam)
                  + (gt - gl) ** 2 / (ht - hl + lam)
                  - gt ** 2 / (ht + lam))
    best = int(np.argmax(gain))
    threshold = 0.5 * (xs[cuts[best]] + xs[cuts[best] + 1])
    return float(gain[best]), float(threshold)


class RegressionTree:
    """Greedy tree on gradient/hessian statistics; leaves hold -G/(H+lambda)."""

    def __init__(self, max_depth: int = 3, lam: float = 1.0):
        self.max_depth = max_depth
        self.lam = lam
        self.root: _Node | None = None

    def fit(self, x, g, h) -> "RegressionTree":
        if len(x) == 0:
            raise EmptyData("cannot fit a tree on no samples")
        self.root = self._grow(x, g, h, depth=0)
        return self

    def _leaf(self, g, h) -> _Node:
        return _Node(value=float(-g.sum() / (h.sum() + self.lam)))

    def _grow(self, x, g, h, depth) -> _Node:
        if depth >= self.max_depth or len(g) < 2:
            return self._leaf(g, h)
        best = None
        for f in range(x.shape[1]):
            found = _newton_best_split(x[:, f], g, h, self.lam)
            if found is None:
                continue
            gain, threshold = found
            if best is None or gain > best[0] + 1e-15:
                best = (gain, f, threshold)
        if best is None or best[0] <= 1e-12:
            return self._leaf(g, h)
        _, f, threshold = best
        mask = x[:, f] < threshold
        return _Node(feature=f, threshold=threshold,
                     left=self._grow(x[mask], g[mask], h[mask], depth + 1),
                     right=self._grow(x[~mask], g[~mask], h[~mask], depth + 1))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.array([_descend(self.root, row) for row in x])

    def to_dict(self) -> dict:
        return {"max_depth": self.max_depth, "lam": self.lam,
                "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        tree = cls(max_depth=d["max_depth"], lam=d["lam"])
        tree.root = _Node.from_dict(d["root"])
        return tree
