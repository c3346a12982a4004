"""Minimal sequential-network engine: layers, losses, Adam, training, checks."""

from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2D,
    Param,
    ReLU,
    Sigmoid,
    layer_from_spec,
)
from .model import Model
from .losses import ClassWeights, class_weights, mse_loss, softmax, weighted_cross_entropy
from .optim import Adam
from .training import TrainHistory, train
from .gradcheck import grad_check
from .checkpoint import load_model, save_model

__all__ = [
    "Adam", "BatchNorm", "ClassWeights", "Conv2D", "Dense", "Dropout", "Flatten",
    "MaxPool2D", "Model", "Param", "ReLU", "Sigmoid", "TrainHistory",
    "class_weights", "grad_check", "layer_from_spec", "load_model", "mse_loss",
    "save_model", "softmax", "train", "weighted_cross_entropy",
]
