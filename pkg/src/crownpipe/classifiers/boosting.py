"""Boosted ensembles: SAMME AdaBoost over stumps and one-vs-rest
gradient-boosted trees with logistic loss.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyData, InvalidConfig, SingleClass
from ..raster import NUM_CLASSES
from .base import ClassifierBase, EmbeddingDataset
from .tree import DecisionTree, RegressionTree

_ERR_FLOOR = 1e-10


class AdaBoost(ClassifierBase):
    kind = "adaboost"

    def __init__(self, stumps: list[DecisionTree], alphas: list[float],
                 classes: np.ndarray, n_features: int):
        self.stumps = stumps
        self.alphas = alphas
        self.classes_ = classes
        self.n_features = n_features

    def predict_proba(self, x) -> np.ndarray:
        x = self._check_features(x)
        scores = np.zeros((len(x), NUM_CLASSES))
        for stump, alpha in zip(self.stumps, self.alphas):
            scores[np.arange(len(x)), stump.predict(x)] += alpha
        total = scores.sum(axis=1, keepdims=True)
        total[total == 0] = 1.0
        return scores / total

    def to_state(self):
        meta = {"n_features": self.n_features, "classes": self.classes_.tolist(),
                "alphas": list(self.alphas),
                "stumps": [s.to_dict() for s in self.stumps]}
        return meta, []

    @classmethod
    def from_state(cls, meta, blobs):
        stumps = [DecisionTree.from_dict(d) for d in meta["stumps"]]
        return cls(stumps, meta["alphas"],
                   np.asarray(meta["classes"], dtype=np.int64), meta["n_features"])


def train_adaboost(data: EmbeddingDataset, n_rounds: int = 100,
                   seed: int = 0) -> AdaBoost:
    """SAMME boosting of depth-1 stumps.

    Round weight is ln((1-err)/err) + ln(K-1) with K = 4. A perfect stump
    (err = 0) ends boosting but is kept with a large weight; a stump no
    better than chance (err >= (K-1)/K) is rejected and boosting halts.
    """
    if n_rounds < 1:
        raise InvalidConfig("need at least one boosting round")
    n = len(data)
    if n == 0:
        raise EmptyData("cannot boost on no samples")
    if len(np.unique(data.y)) < 2:
        raise SingleClass("boosting needs at least two classes")
    k = NUM_CLASSES
    chance = (k - 1) / k
    w = np.full(n, 1.0 / n)
    stumps, alphas = [], []
    for _ in range(n_rounds):
        stump = DecisionTree(max_depth=1).fit(data.x, data.y, sample_weight=w)
        pred = stump.predict(data.x)
        miss = pred != data.y
        err = float(w[miss].sum() / w.sum())
        if err >= chance:
            break  # no better than chance: reject the round, halt reweighting
        err = max(err, _ERR_FLOOR)
        alpha = np.log((1.0 - err) / err) + np.log(k - 1.0)
        stumps.append(stump)
        alphas.append(alpha)
        if err <= _ERR_FLOOR:
            break  # perfect stump: keep it and stop early
        w *= np.exp(alpha * miss)
        w /= w.sum()
    if not stumps:
        # first stump rejected; keep it anyway so the model can predict
        stumps, alphas = [stump], [1.0]
    return AdaBoost(stumps, alphas, np.unique(data.y), data.x.shape[1])


class GradientBoostedTrees(ClassifierBase):
    """One-vs-rest logistic-loss boosting; stands in for the XGBoost/CatBoost
    entries of the classifier bank."""

    kind = "gbt"

    def __init__(self, trees: dict[int, list[RegressionTree]], learning_rate: float,
                 classes: np.ndarray, n_features: int,
                 staged_train_loss: list[float] | None = None):
        self.trees = trees
        self.learning_rate = learning_rate
        self.classes_ = classes
        self.n_features = n_features
        self.staged_train_loss = staged_train_loss or []

    def _scores(self, x) -> np.ndarray:
        scores = np.full((len(x), NUM_CLASSES), -np.inf)
        for c, trees in self.trees.items():
            s = np.zeros(len(x))
            for tree in trees:
                s += self.learning_rate * tree.predict(x)
            scores[:, c] = s
        return scores

    def predict_proba(self, x) -> np.ndarray:
        x = self._check_features(x)
        scores = self._scores(x)
        proba = np.zeros_like(scores)
        present = list(self.trees)
        proba[:, present] = _sigmoid(scores[:, present])
        total = proba.sum(axis=1, keepdims=True)
        total[total == 0] = 1.0
        return proba / total

    def to_state(self):
        meta = {"n_features": self.n_features, "classes": self.classes_.tolist(),
                "learning_rate": self.learning_rate,
                "trees": {str(c): [t.to_dict() for t in ts]
                          for c, ts in self.trees.items()}}
        return meta, []

    @classmethod
    def from_state(cls, meta, blobs):
        trees = {int(c): [RegressionTree.from_dict(d) for d in ts]
                 for c, ts in meta["trees"].items()}
        return cls(trees, meta["learning_rate"],
                   np.asarray(meta["classes"], dtype=np.int64), meta["n_features"])


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logloss(y01: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(-(y01 * np.log(p) + (1 - y01) * np.log(1 - p)).mean())


def train_gbt(data: EmbeddingDataset, n_trees: int = 200, depth: int = 3,
              learning_rate: float = 0.1, seed: int = 0, *,
              lam: float = 1.0) -> GradientBoostedTrees:
    """Boost ``n_trees`` rounds; each round fits one tree per present class.

    Trees are grown greedily on the logistic gradients/hessians of the
    one-vs-rest targets; ``staged_train_loss`` records the summed OvR
    training loss after every round.
    """
    if not 0.0 < learning_rate <= 1.0:
        raise InvalidConfig(f"learning_rate must be in (0, 1], got {learning_rate}")
    if n_trees < 1:
        raise InvalidConfig("need at least one boosting round")
    if len(data) == 0:
        raise EmptyData("cannot boost on no samples")
    classes = np.unique(data.y)
    targets = {int(c): (data.y == c).astype(np.float64) for c in classes}
    scores = {int(c): np.zeros(len(data)) for c in classes}
    trees: dict[int, list[RegressionTree]] = {int(c): [] for c in classes}
    staged = []
    for _ in range(n_trees):
        for c in map(int, classes):
            p = _sigmoid(scores[c])
            grad = p - targets[c]
            hess = np.maximum(p * (1.0 - p), 1e-16)
            tree = RegressionTree(max_depth=depth, lam=lam).fit(data.x, grad, hess)
            scores[c] += learning_rate * tree.predict(data.x)
            trees[c].append(tree)
        staged.append(sum(_logloss(targets[c], _sigmoid(scores[c]))
                          for c in map(int, classes)))
    return GradientBoostedTrees(trees, learning_rate, classes, data.x.shape[1],
                                staged_train_loss=staged)
