"""Toy CNN zoo: build, train, predict, differentiate, persist."""

from .architectures import INPUT_SHAPE, Architecture, get_architecture, zoo
from .network import (
    ModelParams,
    build_logits,
    input_gradient,
    logits_node,
    predict,
    predict_batch,
)
from .serialize import ModelFileError, load_model, save_model
from .training import DEFAULT_HYPER, train_classifier

__all__ = [
    "Architecture",
    "DEFAULT_HYPER",
    "INPUT_SHAPE",
    "ModelFileError",
    "ModelParams",
    "build_logits",
    "get_architecture",
    "input_gradient",
    "load_model",
    "logits_node",
    "predict",
    "predict_batch",
    "save_model",
    "train_classifier",
    "zoo",
]
