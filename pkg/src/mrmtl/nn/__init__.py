"""Minimal float64 neural-network engine for the encoder/decoder stacks."""

from .layers import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2D,
    ShapeError,
    layer_from_config,
    softmax,
)
from .loss import cross_entropy, cross_entropy_grad
from .network import Network
from .optim import Adam, NumericError
from .gradcheck import GradCheckReport, gradcheck, relative_error
from .checkpoint import load_checkpoint, read_header, save_checkpoint

__all__ = [
    "Adam",
    "Conv2D",
    "Dense",
    "Dropout",
    "Flatten",
    "GradCheckReport",
    "Layer",
    "MaxPool2D",
    "Network",
    "NumericError",
    "ShapeError",
    "cross_entropy",
    "cross_entropy_grad",
    "gradcheck",
    "layer_from_config",
    "load_checkpoint",
    "read_header",
    "relative_error",
    "save_checkpoint",
    "softmax",
]
