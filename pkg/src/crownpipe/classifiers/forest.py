"""Random forest: bootstrap-sampled Gini trees, sqrt-feature splits, majority vote."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyData
from ..raster import NUM_CLASSES
from .base import ClassifierBase, EmbeddingDataset
from .tree import DecisionTree


class RandomForest(ClassifierBase):
    kind = "rf"

    def __init__(self, trees: list[DecisionTree], classes: np.ndarray, n_features: int):
        self.trees = trees
        self.classes_ = classes
        self.n_features = n_features

    def predict_proba(self, x) -> np.ndarray:
        x = self._check_features(x)
        votes = np.zeros((len(x), NUM_CLASSES))
        for tree in self.trees:
            votes[np.arange(len(x)), tree.predict(x)] += 1.0
        return votes / len(self.trees)

    def to_state(self):
        meta = {"n_features": self.n_features,
                "classes": self.classes_.tolist(),
                "trees": [t.to_dict() for t in self.trees]}
        return meta, []

    @classmethod
    def from_state(cls, meta, blobs):
        trees = [DecisionTree.from_dict(d) for d in meta["trees"]]
        return cls(trees, np.asarray(meta["classes"], dtype=np.int64),
                   meta["n_features"])


def train_random_forest(data: EmbeddingDataset, n_trees: int = 100,
                        max_depth: int = 10, seed: int = 0, *,
                        bootstrap: bool = True,
                        max_features="sqrt") -> RandomForest:
    """Fit ``n_trees`` Gini trees on bootstrap resamples.

    Per-tree RNG streams are spawned from the master seed, so the forest is
    deterministic regardless of fitting order. ``bootstrap=False`` fits every
    tree on the full sample (useful for isolating the split search).
    """
    if n_trees < 1:
        raise EmptyData("need at least one tree")
    if len(data) == 0:
        raise EmptyData("cannot fit a forest on no samples")
    streams = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        if bootstrap:
            idx = rng.integers(0, len(data), size=len(data))
        else:
            idx = np.arange(len(data))
        tree = DecisionTree(max_depth=max_depth, max_features=max_features, rng=rng)
        tree.fit(data.x[idx], data.y[idx])
        trees.append(tree)
    return RandomForest(trees, np.unique(data.y), data.x.shape[1])
