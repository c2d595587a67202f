"""Minimal dense-tensor neural network engine (numpy-backed)."""

from .layers import (
    Activation,
    Conv2D,
    Dense,
    Dropout,
    GRU,
    Layer,
    Reshape,
    ShapeMismatch,
    conv2d_forward,
    dense_forward,
    gru_forward,
    layer_from_spec,
    relu,
    sigmoid,
)
from .graph import ModelGraph, NaNDetected, param_count, shape_trace
from .train import (
    Adam,
    EmptyDataset,
    Sgd,
    TrainConfig,
    TrainReport,
    bce_grad,
    bce_loss,
    evaluate,
    predict,
    predict_batch,
    stack_dataset,
    train,
)
from .gradcheck import analytic_gradients, finite_difference_gradients, max_relative_error
from .serialize import CorruptModel, deserialize_model, serialize_model

__all__ = [
    "Activation", "Conv2D", "Dense", "Dropout", "GRU", "Layer", "Reshape",
    "ShapeMismatch", "conv2d_forward", "dense_forward", "gru_forward",
    "layer_from_spec", "relu", "sigmoid",
    "ModelGraph", "NaNDetected", "param_count", "shape_trace",
    "Adam", "EmptyDataset", "Sgd", "TrainConfig", "TrainReport",
    "bce_grad", "bce_loss", "evaluate", "predict", "predict_batch",
    "stack_dataset", "train",
    "analytic_gradients", "finite_difference_gradients", "max_relative_error",
    "CorruptModel", "deserialize_model", "serialize_model",
]
