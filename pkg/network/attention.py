"""Axial self-attention along one spatial axis of a (B, C, L1, L2, L3) volume."""

from __future__ import annotations

import math

import numpy as np

import functions as F
from models.config import AttentionConfig
from network.accounting import SOFTMAX_FLOPS
from network.layers import Linear
from network.module import Module, Shape
from tensor.random import Rng
from tensor.tensor import ShapeError, Tensor

SPATIAL_AXES = (2, 3, 4)


def _row_layout(shape: Shape, axis: int) -> tuple[int, ...]:
    if len(shape) != 5:
        raise ShapeError(f"axial attention expects (B, C, L1, L2, L3), got {shape}")
    if axis not in SPATIAL_AXES:
        raise ShapeError(f"attention axis must be one of {SPATIAL_AXES}, got {axis}")
    others = tuple(a for a in SPATIAL_AXES if a != axis)
    return (0, *others, axis, 1)


class AxialSelfAttention(Module):
    """Single-head scaled dot-product attention along one axis.

    Every (b, l, l') line along the attended axis is an independent row of
    L tokens with C features; Q, K and V come from pointwise maps C -> C and the
    scores are scaled by 1/sqrt(C). K has no bias: a key offset shifts every score
    in a row equally and the softmax cancels it.
    """

    def __init__(self, channels: int, cfg: AttentionConfig, rng: Rng):
        self.channels = channels
        self.residual = cfg.residual
        self.q_proj = Linear(channels, channels, rng)
        self.k_proj = Linear(channels, channels, rng, bias=False)
        self.v_proj = Linear(channels, channels, rng)
        self.out_proj = Linear(channels, channels, rng) if cfg.out_proj else None

    def _rows(self, x: Tensor, axis: int) -> tuple[Tensor, tuple[int, ...], Shape]:
        layout = _row_layout(x.shape, axis)
        if x.shape[1] != self.channels:
            raise ShapeError(f"attention expects {self.channels} channels, got {x.shape[1]}")
        moved = x.permute(layout)
        b, la, lb, length, c = moved.shape
        return moved.reshape(b * la * lb, length, c), layout, moved.shape

    def attention_weights(self, x: Tensor, axis: int) -> Tensor:
        """Softmax weights, one (L, L) matrix per row."""
        rows, _, _ = self._rows(x, axis)
        return self._weights(rows)

    def _weights(self, rows: Tensor) -> Tensor:
        q, k = self.q_proj(rows), self.k_proj(rows)
        scores = F.matmul(q, k.permute(0, 2, 1)) * (1.0 / math.sqrt(self.channels))
        return F.softmax(scores, axis=-1)

    def attend(self, x: Tensor, axis: int) -> Tensor:
        """Attention output before the residual add, in the input layout."""
        rows, layout, moved_shape = self._rows(x, axis)
        out = F.matmul(self._weights(rows), self.v_proj(rows))
        if self.out_proj is not None:
            out = self.out_proj(out)
        return out.reshape(moved_shape).permute(tuple(np.argsort(layout)))

    def forward(self, x: Tensor, axis: int = 4) -> Tensor:
        out = self.attend(x, axis)
        return x + out if self.residual else out

    def flops(self, shape: Shape, axis: int = 4) -> tuple[int, Shape]:
        layout = _row_layout(shape, axis)
        length = shape[axis]
        rows = math.prod(shape[a] for a in layout[:3])
        c = self.channels
        row_shape = (rows, length, c)
        count = 3 * self.q_proj.flops(row_shape)[0]
        # scores, scale, softmax, weighted sum
        count += rows * (2 * length * length * c + length * length)
        count += rows * SOFTMAX_FLOPS * length * length
        count += rows * 2 * length * length * c
        if self.out_proj is not None:
            count += self.out_proj.flops(row_shape)[0]
        if self.residual:
            count += math.prod(shape)
        return count, shape
