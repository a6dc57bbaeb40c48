"""Multi-view module: asymmetric channel split, tri-planar reslicing, VSSB + ASA per view.

Axis naming for (B, C, D, H, W) volumes: D is the axial normal, H the coronal
normal and W the sagittal normal. Axial slices are H x W, coronal D x W and
sagittal D x H.
"""

from __future__ import annotations

import numpy as np
from loguru import logger

import functions as F
from models.config import ConfigError, MismConfig
from network.attention import AxialSelfAttention
from network.layers import Conv3d
from network.module import Module, Shape
from network.ssm import VSSB
from tensor.random import Rng
from tensor.tensor import ShapeError, Tensor

VIEW_AXES = {"axial": 2, "coronal": 3, "sagittal": 4}
VIEWS = tuple(VIEW_AXES)


def view_axis(view: str) -> int:
    if view not in VIEW_AXES:
        raise ValueError(f"unknown view {view!r}, expected one of {VIEWS}")
    return VIEW_AXES[view]


def split_sizes(channels: int) -> tuple[int, int, int]:
    """Axial/coronal/sagittal channel shares: C/2, C/4, C/4."""
    if channels % 4:
        raise ConfigError("model.stage_widths", f"MISM width {channels} must be divisible by 4")
    return channels // 2, channels // 4, channels // 4


def asc_split(x: Tensor) -> list[Tensor]:
    """Split channels into contiguous [0, C/2), [C/2, 3C/4), [3C/4, C) shares."""
    return F.split(x, split_sizes(x.shape[1]), axis=1)


def _slice_layout(axis: int) -> tuple[int, ...]:
    rest = tuple(a for a in (2, 3, 4) if a != axis)
    return (0, axis, 1, *rest)


def reslice(x: Tensor, view: str) -> Tensor:
    """(B, C, D, H, W) -> (B * L_normal, C, P, Q) slices for ``view``."""
    layout = _slice_layout(view_axis(view))
    moved = x.permute(layout)
    b, normal, c, p, q = moved.shape
    return moved.reshape(b * normal, c, p, q)


def unslice(slices: Tensor, view: str, shape: Shape) -> Tensor:
    """Inverse of `reslice` for a volume of ``shape``."""
    layout = _slice_layout(view_axis(view))
    moved_shape = tuple(shape[a] for a in layout)
    return slices.reshape(moved_shape).permute(tuple(np.argsort(layout)))


class ViewBranch(Module):
    """VSSB over the view's slices (weights shared across slices), then ASA along its normal."""

    def __init__(self, channels: int, view: str, cfg: MismConfig, rng: Rng, eps: float = 1e-5):
        self.view = view
        self.axis = view_axis(view)
        self.channels = channels
        self.vssb = VSSB(channels, cfg.scan, rng, eps) if cfg.use_vssb else None
        self.asa = AxialSelfAttention(channels, cfg.attention, rng) if cfg.use_asa else None

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 5 or x.shape[1] != self.channels:
            raise ShapeError(f"{self.view} branch expects (B, {self.channels}, D, H, W), got {x.shape}")
        if self.vssb is not None:
            x = unslice(self.vssb(reslice(x, self.view)), self.view, x.shape)
        if self.asa is not None:
            x = self.asa(x, self.axis)
        return x

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        count = 0
        if self.vssb is not None:
            layout = _slice_layout(self.axis)
            b, normal, c, p, q = (shape[a] for a in layout)
            count += self.vssb.flops((b * normal, c, p, q))[0]
        if self.asa is not None:
            count += self.asa.flops(shape, self.axis)[0]
        return count, shape


def view_process(x: Tensor, view: str, branch: ViewBranch) -> Tensor:
    """Run ``branch`` on a channel share, checking it belongs to ``view``."""
    view_axis(view)
    if branch.view != view:
        raise ValueError(f"branch is configured for {branch.view!r}, not {view!r}")
    return branch(x)


class MISM(Module):
    """Split channels across the three views, process each, concat, fuse and add the input."""

    def __init__(self, channels: int, cfg: MismConfig, rng: Rng, eps: float = 1e-5):
        self.channels = channels
        self.asymmetric = cfg.asymmetric_split
        self.residual = cfg.residual
        shares = split_sizes(channels) if self.asymmetric else (channels,) * 3
        self.branches = [ViewBranch(share, view, cfg, rng, eps) for share, view in zip(shares, VIEWS)]
        if self.asymmetric and cfg.fuse:
            self.fuse: Conv3d | None = Conv3d(channels, channels, 1, rng)
        elif not self.asymmetric:
            if not cfg.fuse:
                logger.warning("MISM without the asymmetric split needs the fuse conv; enabling it")
            self.fuse = Conv3d(3 * channels, channels, 1, rng)
        else:
            self.fuse = None

    def branch_outputs(self, x: Tensor) -> list[Tensor]:
        """Per-view outputs before concat and fuse, in axial/coronal/sagittal order."""
        if x.ndim != 5 or x.shape[1] != self.channels:
            raise ShapeError(f"MISM expects (B, {self.channels}, D, H, W), got {x.shape}")
        parts = asc_split(x) if self.asymmetric else [x, x, x]
        return [view_process(part, branch.view, branch) for part, branch in zip(parts, self.branches)]

    def forward(self, x: Tensor) -> Tensor:
        joined = F.concat(self.branch_outputs(x), axis=1)
        if self.fuse is None:
            # each branch already carries the residual of its share
            return joined
        fused = self.fuse(joined)
        return x + fused if self.residual else fused

    def flops(self, shape: Shape) -> tuple[int, Shape]:
        b, c, *extents = shape
        count = sum(
            branch.flops((b, branch.channels, *extents))[0] for branch in self.branches
        )
        if self.fuse is not None:
            width = c if self.asymmetric else 3 * c
            count += self.fuse.flops((b, width, *extents))[0]
            if self.residual:
                count += int(np.prod(shape))
        return count, shape
