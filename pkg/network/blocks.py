"""Convolutional building blocks of the encoder and decoder."""

from __future__ import annotations

import math

import functions as F
from models.config import MismConfig
from network.accounting import activation_flops
from network.layers import Conv3d, InstanceNorm3d, TransposeConv3d, activation
from network.mism import MISM
from network.module import Module, Shape
from network.ssm import Mamba3d
from tensor.random import Rng
from tensor.tensor import ShapeError, Tensor


class ConvBlock(Module):
    """3x3x3 conv -> instance norm -> activation, at constant resolution.

    The conv has no bias; the norm removes any per-channel constant.
    """

    def __init__(self, in_channels: int, out_channels: int, rng: Rng, act: str = "silu", eps: float = 1e-5):
        self.conv = Conv3d(in_channels, out_channels, 3, rng, padding=1, bias=False)
        self.norm = InstanceNorm3d(out_channels, eps)
        self.act_name = act

    def forward(self, x: Tensor) -> Tensor:
        return activation(self.act_name)(self.norm(self.conv(x)))

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        count, out = self.conv.flops(shape)
        count += self.norm.flops(out)[0] + activation_flops(self.act_name, math.prod(out))
        return count, out


class ResBlock(Module):
    """Downsampling block that keeps the channel count.

    Main path: stride-2 depthwise 3x3x3 (no bias) -> norm -> activation -> pointwise.
    Residual path: 2x2x2 average pooling, parameter-free.
    """

    def __init__(self, channels: int, rng: Rng, act: str = "silu", eps: float = 1e-5):
        self.channels = channels
        self.depthwise = Conv3d(channels, channels, 3, rng, stride=2, padding=1, groups=channels, bias=False)
        self.norm = InstanceNorm3d(channels, eps)
        self.pointwise = Conv3d(channels, channels, 1, rng)
        self.act_name = act

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 5 or any(e % 2 for e in x.shape[2:]):
            raise ShapeError(f"ResBlock needs even spatial extents, got {x.shape}")
        main = self.pointwise(activation(self.act_name)(self.norm(self.depthwise(x))))
        return main + F.avg_pool3d(x, 2)

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        count, out = self.depthwise.flops(shape)
        count += self.norm.flops(out)[0] + activation_flops(self.act_name, math.prod(out))
        count += self.pointwise.flops(out)[0]
        count += math.prod(shape) + math.prod(out)  # pooling, residual add
        return count, out


class DenseBlock(Module):
    """Channel expansion: x1 = DW(x); x2 = PW([x, x1]) with Cin outputs; out = PW([x, x1, x2])."""

    def __init__(self, in_channels: int, out_channels: int, rng: Rng):
        self.in_channels, self.out_channels = in_channels, out_channels
        self.depthwise = Conv3d(in_channels, in_channels, 3, rng, padding=1, groups=in_channels)
        self.mix = Conv3d(2 * in_channels, in_channels, 1, rng)
        self.expand = Conv3d(3 * in_channels, out_channels, 1, rng)

    def forward_with_intermediates(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        """Return (out, x1, x2)."""
        x1 = self.depthwise(x)
        x2 = self.mix(F.concat([x, x1], axis=1))
        return self.expand(F.concat([x, x1, x2], axis=1)), x1, x2

    def forward(self, x: Tensor) -> Tensor:
        return self.forward_with_intermediates(x)[0]

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        b, c, *extents = shape
        count = self.depthwise.flops(shape)[0]
        count += self.mix.flops((b, 2 * c, *extents))[0]
        expand, out = self.expand.flops((b, 3 * c, *extents))
        return count + expand, out


class HybridBlock(Module):
    """MISM (or Mamba3d) followed by a Dense Block; the Dense Block does the expansion."""

    def __init__(self, in_channels: int, out_channels: int, cfg: MismConfig, rng: Rng, eps: float = 1e-5):
        self.mism: Module = (
            MISM(in_channels, cfg, rng, eps) if cfg.variant == "mism" else Mamba3d(in_channels, cfg.scan, rng, eps)
        )
        self.dense = DenseBlock(in_channels, out_channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.dense(self.mism(x))

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        count, _ = self.mism.flops(shape)
        dense, out = self.dense.flops(shape)
        return count + dense, out


class HCMAUp(Module):
    """Decoder step: 2x transpose conv to the skip width, concat with the skip, one conv block."""

    def __init__(self, low_channels: int, skip_channels: int, rng: Rng, act: str = "silu", eps: float = 1e-5):
        self.up = TransposeConv3d(low_channels, skip_channels, rng, stride=2)
        self.block = ConvBlock(2 * skip_channels, skip_channels, rng, act, eps)

    def forward(self, x_low: Tensor, x_skip: Tensor) -> Tensor:
        up = self.up(x_low)
        if up.shape != x_skip.shape:
            raise ShapeError(f"upsampled {up.shape} does not match skip {x_skip.shape}")
        return self.block(F.concat([up, x_skip], axis=1))

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        count, up = self.up.flops(shape)
        b, c, *extents = up
        block, out = self.block.flops((b, 2 * c, *extents))
        return count + block, out


class OutBlock(Module):
    """Pointwise conv to class logits; no activation."""

    def __init__(self, in_channels: int, num_classes: int, rng: Rng):
        self.head = Conv3d(in_channels, num_classes, 1, rng)

    def forward(self, f: Tensor) -> Tensor:
        return self.head(f)

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        return self.head.flops(shape)
