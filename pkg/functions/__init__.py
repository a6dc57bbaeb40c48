"""Differentiable functions over tensors."""

from functions.base import Function
from functions.conv import avg_pool3d, conv3d, transpose_conv3d
from functions.elementwise import (
    add,
    clamp_min,
    div,
    exp,
    log,
    mul,
    neg,
    relu,
    sigmoid,
    silu,
    softplus,
    sqrt,
    sub,
)
from functions.linalg import log_softmax, matmul, softmax
from functions.norm import instance_norm, layer_norm
from functions.scan import discretize, selective_scan
from functions.structural import (
    concat,
    index,
    permute,
    reduce_mean,
    reduce_sum,
    reshape,
    slice_axis,
    split,
    take,
)

__all__ = [
    "Function",
    "add",
    "avg_pool3d",
    "clamp_min",
    "concat",
    "conv3d",
    "discretize",
    "div",
    "exp",
    "index",
    "instance_norm",
    "layer_norm",
    "log",
    "log_softmax",
    "matmul",
    "mul",
    "neg",
    "permute",
    "reduce_mean",
    "reduce_sum",
    "relu",
    "reshape",
    "selective_scan",
    "sigmoid",
    "silu",
    "slice_axis",
    "softmax",
    "softplus",
    "split",
    "sqrt",
    "sub",
    "take",
    "transpose_conv3d",
]
