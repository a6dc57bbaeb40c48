"""Selective state-space blocks: S6, the 2-D cross-scan, the VSSB and Mamba3d."""

from __future__ import annotations

import math

import numpy as np

import functions as F
from models.config import ScanConfig
from network.accounting import ACTIVATION_FLOPS, SCAN_FLOPS
from network.layers import Conv3d, LayerNorm, Linear
from network.module import Module, Parameter, Shape
from tensor.random import Rng
from tensor.tensor import ShapeError, Tensor, get_default_dtype

DT_MIN, DT_MAX = 0.01, 0.1


def scan_orders(height: int, width: int) -> list[np.ndarray]:
    """Flat spatial indices visited by the four scan directions.

    Order: row-major forward, column-major forward, row-major reverse,
    column-major reverse.
    """
    if height < 1 or width < 1:
        raise ShapeError(f"cross-scan needs a non-empty slice, got {height}x{width}")
    rows = np.arange(height * width)
    cols = rows.reshape(height, width).T.ravel()
    return [rows, cols, rows[::-1].copy(), cols[::-1].copy()]


def cross_scan(x: Tensor) -> list[Tensor]:
    """Unfold slices into four token sequences.

    Args:
        x: (C, H, W) or (N, C, H, W)

    Returns:
        Four sequences of shape (H*W, C), or (N, H*W, C) for batched input
    """
    batched = x.ndim == 4
    if not batched:
        if x.ndim != 3:
            raise ShapeError(f"cross_scan expects (C, H, W) or (N, C, H, W), got {x.shape}")
        x = x.reshape(1, *x.shape)
    n, c, h, w = x.shape
    tokens = x.reshape(n, c, h * w).permute(0, 2, 1)
    sequences = [F.take(tokens, order, axis=1) for order in scan_orders(h, w)]
    return sequences if batched else [s.reshape(h * w, c) for s in sequences]


def cross_merge(sequences: list[Tensor], height: int, width: int) -> Tensor:
    """Inverse-permute each sequence back to the slice layout and sum them.

    Args:
        sequences: Four (H*W, C) or (N, H*W, C) tensors in cross_scan order
        height: Slice height H
        width: Slice width W

    Returns:
        (C, H, W), or (N, C, H, W) for batched sequences
    """
    orders = scan_orders(height, width)
    if len(sequences) != len(orders):
        raise ShapeError(f"cross_merge needs {len(orders)} sequences, got {len(sequences)}")
    batched = sequences[0].ndim == 3
    merged: Tensor | None = None
    for seq, order in zip(sequences, orders):
        if seq.shape[-2] != height * width or seq.shape != sequences[0].shape:
            raise ShapeError(f"sequence {seq.shape} does not match a {height}x{width} slice")
        if not batched:
            seq = seq.reshape(1, *seq.shape)
        spatial = F.take(seq, np.argsort(order), axis=1)
        merged = spatial if merged is None else merged + spatial
    assert merged is not None
    n, _, c = merged.shape
    out = merged.permute(0, 2, 1).reshape(n, c, height, width)
    return out if batched else out.reshape(c, height, width)


class S6(Module):
    """Input-dependent diagonal state-space layer over (N, L, d_inner) sequences.

    A = -exp(A_log) starts at -1..-d_state per channel; delta = softplus(.) of a
    pointwise map whose bias puts the initial step size in [DT_MIN, DT_MAX].
    """

    def __init__(self, d_inner: int, d_state: int, rng: Rng):
        self.d_inner, self.d_state = d_inner, d_state
        dtype = get_default_dtype()
        self.A_log = Parameter(np.log(np.tile(np.arange(1, d_state + 1, dtype=dtype), (d_inner, 1))))
        self.proj_B = Linear(d_inner, d_state, rng, bias=False)
        self.proj_C = Linear(d_inner, d_state, rng, bias=False)
        self.proj_delta = Linear(d_inner, d_inner, rng)
        bound = d_inner**-0.5
        self.proj_delta.weight.data = rng.uniform((d_inner, d_inner), -bound, bound)
        dt = np.exp(rng.uniform((d_inner,), math.log(DT_MIN), math.log(DT_MAX), dtype=np.float64))
        self.proj_delta.bias.data = (dt + np.log(-np.expm1(-dt))).astype(dtype)  # type: ignore[union-attr]
        self.D = Parameter(np.ones(d_inner, dtype=dtype))

    def forward(self, u: Tensor) -> Tensor:
        squeeze = u.ndim == 2
        if squeeze:
            u = u.reshape(1, *u.shape)
        if u.ndim != 3 or u.shape[-1] != self.d_inner:
            raise ShapeError(f"S6 expects (N, L, {self.d_inner}), got {u.shape}")
        delta = F.softplus(self.proj_delta(u))
        A = -self.A_log.exp()
        y = F.selective_scan(u, delta, A, self.proj_B(u), self.proj_C(u), self.D)
        return y.reshape(*y.shape[1:]) if squeeze else y

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        tokens = math.prod(shape[:-1])
        count = self.proj_delta.flops(shape)[0] + ACTIVATION_FLOPS * tokens * self.d_inner
        count += self.proj_B.flops(shape)[0] + self.proj_C.flops(shape)[0]
        count += 2 * self.d_inner * self.d_state
        count += tokens * self.d_inner * (SCAN_FLOPS * self.d_state + 2)
        return count, shape


class VSSB(Module):
    """Visual state-space block over a batch of 2-D slices (N, C, H, W).

    LN -> expand -> depthwise 3x3 -> SiLU -> cross-scan -> S6 x4 -> merge -> LN,
    gated by SiLU of a parallel pointwise branch, projected back to C and added
    to the input.
    """

    def __init__(self, channels: int, cfg: ScanConfig, rng: Rng, eps: float = 1e-5):
        self.channels = channels
        self.inner = cfg.expansion * channels
        self.norm = LayerNorm(channels, eps)
        self.expand = Linear(channels, self.inner, rng)
        self.gate = Linear(channels, self.inner, rng)
        self.conv = Conv3d(self.inner, self.inner, (1, 3, 3), rng, padding=(0, 1, 1), groups=self.inner)
        directions = 1 if cfg.shared_scan_params else 4
        self.scans = [S6(self.inner, cfg.d_state, rng) for _ in range(directions)]
        self.out_norm = LayerNorm(self.inner, eps)
        self.out_proj = Linear(self.inner, channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeError(f"VSSB expects (N, {self.channels}, H, W), got {x.shape}")
        n, _, h, w = x.shape
        tokens = self.norm(x.permute(0, 2, 3, 1))
        gate = F.silu(self.gate(tokens))

        inner = self.expand(tokens).permute(0, 3, 1, 2).reshape(n, self.inner, 1, h, w)
        inner = F.silu(self.conv(inner)).reshape(n, self.inner, h, w)

        sequences = cross_scan(inner)
        scanned = [self.scans[i % len(self.scans)](seq) for i, seq in enumerate(sequences)]
        merged = cross_merge(scanned, h, w).permute(0, 2, 3, 1)

        out = self.out_proj(self.out_norm(merged) * gate)
        return x + out.permute(0, 3, 1, 2)

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        n, c, h, w = shape
        tokens = n * h * w
        token_shape = (n, h, w, c)
        count = self.norm.flops(token_shape)[0]
        count += self.expand.flops(token_shape)[0] + self.gate.flops(token_shape)[0]
        count += 2 * ACTIVATION_FLOPS * tokens * self.inner
        count += self.conv.flops((n, self.inner, 1, h, w))[0]
        count += sum(self.scans[i % len(self.scans)].flops((n, h * w, self.inner))[0] for i in range(4))
        count += 3 * tokens * self.inner  # merge
        count += self.out_norm.flops((n, h, w, self.inner))[0] + tokens * self.inner
        count += self.out_proj.flops((n, h, w, self.inner))[0] + tokens * c
        return count, shape


class Mamba3d(Module):
    """Bidirectional state-space block over whole volumes (B, C, D, H, W).

    Same layout as the VSSB, but the depthwise conv is 3x3x3 and the volume is
    scanned as one raster sequence of D*H*W tokens, forward and reversed, with
    no view split.
    """

    def __init__(self, channels: int, cfg: ScanConfig, rng: Rng, eps: float = 1e-5):
        self.channels = channels
        self.inner = cfg.expansion * channels
        self.norm = LayerNorm(channels, eps)
        self.expand = Linear(channels, self.inner, rng)
        self.gate = Linear(channels, self.inner, rng)
        self.conv = Conv3d(self.inner, self.inner, 3, rng, padding=1, groups=self.inner)
        directions = 1 if cfg.shared_scan_params else 2
        self.scans = [S6(self.inner, cfg.d_state, rng) for _ in range(directions)]
        self.out_norm = LayerNorm(self.inner, eps)
        self.out_proj = Linear(self.inner, channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 5 or x.shape[1] != self.channels:
            raise ShapeError(f"Mamba3d expects (B, {self.channels}, D, H, W), got {x.shape}")
        b, _, d, h, w = x.shape
        length = d * h * w
        tokens = self.norm(x.permute(0, 2, 3, 4, 1))
        gate = F.silu(self.gate(tokens))

        inner = F.silu(self.conv(self.expand(tokens).permute(0, 4, 1, 2, 3)))
        sequence = inner.reshape(b, self.inner, length).permute(0, 2, 1)
        reverse = np.arange(length)[::-1].copy()
        ahead = self.scans[0](sequence)
        behind = F.take(self.scans[-1](F.take(sequence, reverse, axis=1)), reverse, axis=1)
        merged = (ahead + behind).reshape(b, d, h, w, self.inner)

        out = self.out_proj(self.out_norm(merged) * gate)
        return x + out.permute(0, 4, 1, 2, 3)

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        b, c, d, h, w = shape
        tokens = b * d * h * w
        token_shape = (b, d, h, w, c)
        inner_shape = (b, d, h, w, self.inner)
        count = self.norm.flops(token_shape)[0]
        count += self.expand.flops(token_shape)[0] + self.gate.flops(token_shape)[0]
        count += 2 * ACTIVATION_FLOPS * tokens * self.inner
        count += self.conv.flops((b, self.inner, d, h, w))[0]
        count += sum(self.scans[i % len(self.scans)].flops((b, d * h * w, self.inner))[0] for i in range(2))
        count += tokens * self.inner  # merge
        count += self.out_norm.flops(inner_shape)[0] + tokens * self.inner
        count += self.out_proj.flops(inner_shape)[0] + tokens * c
        return count, shape
