"""Minimal reverse-mode autodiff engine over float64 tensors."""

from .graph import (
    GraphError,
    Node,
    add,
    clamp,
    constant,
    conv2d,
    cubic_round,
    dct8,
    dct8_roundtrip,
    evaluate,
    grid_sample,
    gradient,
    idct8,
    index,
    leaf,
    matmul,
    maxpool2,
    median_filter,
    multiply,
    pad2d,
    power,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    rgb_to_lab,
    softmax,
    softmax_cross_entropy,
    subtract,
    transpose,
)
from .ops import OpError, bilinear_grid, round_half_up
from .tensor import Tensor, as_array

__all__ = [
    "GraphError",
    "Node",
    "OpError",
    "Tensor",
    "add",
    "as_array",
    "bilinear_grid",
    "clamp",
    "constant",
    "conv2d",
    "cubic_round",
    "dct8",
    "dct8_roundtrip",
    "evaluate",
    "gradient",
    "grid_sample",
    "idct8",
    "index",
    "leaf",
    "matmul",
    "maxpool2",
    "median_filter",
    "multiply",
    "pad2d",
    "power",
    "reduce_mean",
    "reduce_sum",
    "relu",
    "reshape",
    "rgb_to_lab",
    "round_half_up",
    "softmax",
    "softmax_cross_entropy",
    "subtract",
    "transpose",
]
