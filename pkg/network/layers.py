"""Learnable primitives: convolutions, pointwise linear maps, normalization."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

import functions as F
from network.accounting import (
    AFFINE_FLOPS,
    NORM_FLOPS,
    conv_flops,
    linear_flops,
)
from network.module import Module, Parameter, Shape
from tensor.random import Rng
from tensor.tensor import ShapeError, Tensor, get_default_dtype

Triple = tuple[int, int, int]


def _triple(value: int | Triple) -> Triple:
    return (value, value, value) if isinstance(value, int) else value


def activation(name: str) -> Callable[[Tensor], Tensor]:
    return {"silu": F.silu, "relu": F.relu}[name]


class Conv3d(Module):
    """3-D convolution over (B, C, D, H, W), Kaiming fan-in normal init, zero bias."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int | Triple,
        rng: Rng,
        stride: int | Triple = 1,
        padding: int | Triple = 0,
        groups: int = 1,
        bias: bool = True,
    ):
        if in_channels % groups or out_channels % groups:
            raise ShapeError(f"channels {in_channels}->{out_channels} not divisible by groups {groups}")
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel, self.stride, self.padding = _triple(kernel), _triple(stride), _triple(padding)
        self.groups = groups
        fan_in = (in_channels // groups) * math.prod(self.kernel)
        self.weight = Parameter(
            rng.normal((out_channels, in_channels // groups, *self.kernel), std=math.sqrt(2.0 / fan_in))
        )
        self.bias = Parameter(np.zeros(out_channels, dtype=self.weight.dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv3d(x, self.weight, self.bias, self.stride, self.padding, self.groups)

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        batch, _, *extents = shape
        out = tuple(
            (extents[i] + 2 * self.padding[i] - self.kernel[i]) // self.stride[i] + 1 for i in range(3)
        )
        count = conv_flops(
            self.in_channels // self.groups * math.prod(self.kernel),
            self.out_channels,
            batch * math.prod(out),
            self.bias is not None,
        )
        return count, (batch, self.out_channels, *out)


class TransposeConv3d(Module):
    """Transpose convolution with kernel == stride; doubles extents at stride 2."""

    def __init__(self, in_channels: int, out_channels: int, rng: Rng, stride: int = 2):
        self.in_channels, self.out_channels, self.stride = in_channels, out_channels, stride
        fan_in = in_channels
        self.weight = Parameter(
            rng.normal((in_channels, out_channels, stride, stride, stride), std=math.sqrt(2.0 / fan_in))
        )
        self.bias = Parameter(np.zeros(out_channels, dtype=self.weight.dtype))

    def forward(self, x: Tensor) -> Tensor:
        return F.transpose_conv3d(x, self.weight, self.bias, self.stride)

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        batch, _, *extents = shape
        out = tuple(e * self.stride for e in extents)
        count = conv_flops(self.in_channels, self.out_channels, batch * math.prod(out), True)
        return count, (batch, self.out_channels, *out)


class Linear(Module):
    """Pointwise map over the last (channel) axis: x @ W + b."""

    def __init__(self, in_features: int, out_features: int, rng: Rng, bias: bool = True):
        self.in_features, self.out_features = in_features, out_features
        self.weight = Parameter(rng.normal((in_features, out_features), std=math.sqrt(2.0 / in_features)))
        self.bias = Parameter(np.zeros(out_features, dtype=self.weight.dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"Linear expects {self.in_features} features, got {x.shape[-1]}")
        y = F.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        tokens = math.prod(shape[:-1])
        count = linear_flops(self.in_features, self.out_features, tokens, self.bias is not None)
        return count, (*shape[:-1], self.out_features)


class LayerNorm(Module):
    """Per-token normalization over the trailing channel axis with affine scale-shift."""

    def __init__(self, channels: int, eps: float = 1e-5):
        self.channels, self.eps = channels, eps
        self.weight = Parameter(np.ones(channels, dtype=get_default_dtype()))
        self.bias = Parameter(np.zeros(channels, dtype=get_default_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, (self.channels,), self.eps) * self.weight + self.bias

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        return (NORM_FLOPS + AFFINE_FLOPS) * math.prod(shape), shape


class InstanceNorm3d(Module):
    """Per-(sample, channel) normalization over D, H, W with affine scale-shift."""

    def __init__(self, channels: int, eps: float = 1e-5):
        self.channels, self.eps = channels, eps
        self.weight = Parameter(np.ones(channels, dtype=get_default_dtype()))
        self.bias = Parameter(np.zeros(channels, dtype=get_default_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        scale = self.weight.reshape(1, -1, 1, 1, 1)
        shift = self.bias.reshape(1, -1, 1, 1, 1)
        return F.instance_norm(x, self.eps) * scale + shift

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        return (NORM_FLOPS + AFFINE_FLOPS) * math.prod(shape), shape
