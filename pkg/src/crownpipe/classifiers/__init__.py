"""Classical classifiers consuming autoencoder embeddings."""

from .base import (
    EmbeddingDataset,
    load_classifier,
    save_classifier,
    write_predictions,
)
from .svm import SvcRbf, train_svc_rbf
from .logreg import LogisticRegression, train_logreg
from .forest import RandomForest, train_random_forest
from .boosting import AdaBoost, GradientBoostedTrees, train_adaboost, train_gbt

CLASSIFIER_ORDER = ("SVC", "LogReg", "RF", "AdaBoost", "GBT")

_TRAINERS = {
    "svc": train_svc_rbf,
    "logreg": train_logreg,
    "rf": train_random_forest,
    "adaboost": train_adaboost,
    "gbt": train_gbt,
}


def train_by_name(name: str, data, seed: int = 0):
    """Fit one of the bank's classifiers with its default hyperparameters."""
    key = name.lower()
    if key not in _TRAINERS:
        raise KeyError(f"unknown classifier {name!r}; choose from {sorted(_TRAINERS)}")
    return _TRAINERS[key](data, seed=seed)


__all__ = [
    "AdaBoost", "CLASSIFIER_ORDER", "EmbeddingDataset", "GradientBoostedTrees",
    "LogisticRegression", "RandomForest", "SvcRbf", "load_classifier",
    "save_classifier", "train_adaboost", "train_by_name", "train_gbt",
    "train_logreg", "train_random_forest", "train_svc_rbf", "write_predictions",
]
