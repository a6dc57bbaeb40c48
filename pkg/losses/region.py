"""Region-aware feature loss terms on the last decoder features.

All terms share the foreground center f_p (mean foreground feature) and an
eps-guarded cosine similarity. Voxel sets come from ground-truth labels and
are constants within a step; gradients flow through the features and f_p.
"""

from __future__ import annotations

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

import functions as F
from losses.morphology import dilate
from models.volume import VoxelMask
from tensor.tensor import ShapeError, Tensor


class ForegroundCenter(BaseModel):
    """Mean feature over the foreground voxels of one sample."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    f_p: Tensor = Field(..., description="(C,) center vector")
    n_pos: int = Field(..., ge=1)


def zero_like(features: Tensor) -> Tensor:
    return Tensor(np.zeros((), dtype=features.dtype))


def voxel_rows(features: Tensor, mask: VoxelMask) -> Tensor:
    """Feature vectors of the voxels in ``mask`` as (|mask|, C), in linear index order."""
    if features.ndim != 4 or features.shape[1:] != mask.shape:
        raise ShapeError(f"features {features.shape} do not match mask {mask.shape}")
    c = features.shape[0]
    flat = features.reshape(c, -1).permute(1, 0)
    return F.take(flat, mask.indices(), axis=0)


def cosine_similarity(rows: Tensor, center: Tensor, eps: float = 1e-8) -> Tensor:
    """x.y / sqrt(max(|x|^2 |y|^2, eps^2)) for every row x of (V, C) against (C,)."""
    dot = (rows * center).sum(axis=1)
    norms = (rows * rows).sum(axis=1) * (center * center).sum()
    return dot / F.clamp_min(norms, eps * eps).sqrt()


def cosine_similarity_array(rows: np.ndarray, center: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    dot = rows @ center
    norms = np.einsum("vc,vc->v", rows, rows) * np.dot(center, center)
    return dot / np.sqrt(np.maximum(norms, eps * eps))


def foreground_center(features: Tensor, pos: VoxelMask, detach: bool = False) -> ForegroundCenter | None:
    """Average the foreground features; None signals a sample without foreground."""
    if pos.count == 0:
        return None
    f_p = voxel_rows(features, pos).mean(axis=0)
    return ForegroundCenter(f_p=f_p.detach() if detach else f_p, n_pos=pos.count)


def positive_compactness(features: Tensor, pos: VoxelMask, f_p: Tensor, eps: float = 1e-8) -> Tensor:
    """Mean of 1 - sim(f_i, f_p) over the foreground."""
    if pos.count == 0:
        raise ValueError("positive compactness needs at least one foreground voxel")
    return (1.0 - cosine_similarity(voxel_rows(features, pos), f_p, eps)).mean()


def boundary_region(pos: VoxelMask, neg: VoxelMask, iterations: int) -> VoxelMask:
    """Background voxels within ``iterations`` dilation steps of the foreground."""
    return dilate(pos, iterations) & neg


def _mean_positive_similarity(features: Tensor, region: VoxelMask, f_p: Tensor, eps: float) -> Tensor:
    if region.count == 0:
        return zero_like(features)
    return F.relu(cosine_similarity(voxel_rows(features, region), f_p, eps)).mean()


def boundary_loss(
    features: Tensor, pos: VoxelMask, neg: VoxelMask, f_p: Tensor, iterations: int, eps: float = 1e-8
) -> Tensor:
    """Mean ReLU similarity to f_p over the boundary confusion region; 0 when it is empty."""
    return _mean_positive_similarity(features, boundary_region(pos, neg, iterations), f_p, eps)


def mine_hard_negatives(
    features: Tensor, neg: VoxelMask, f_p: Tensor, count: int, eps: float = 1e-8
) -> VoxelMask:
    """Seed mask of the ``count`` background voxels most similar to f_p.

    Ties are broken by ascending linear voxel index; ``count`` is capped at |neg|.
    """
    if features.shape[1:] != neg.shape:
        raise ShapeError(f"features {features.shape} do not match mask {neg.shape}")
    candidates = neg.indices()
    seeds = np.zeros(neg.shape, dtype=bool)
    if candidates.size == 0:
        return VoxelMask.of(seeds)
    if count > candidates.size:
        logger.warning(f"Hard-negative count {count} capped at {candidates.size} background voxels")
        count = candidates.size
    rows = features.data.reshape(features.shape[0], -1).T[candidates]
    sims = cosine_similarity_array(rows, f_p.data, eps)
    order = np.lexsort((candidates, -sims))[:count]
    seeds.flat[candidates[order]] = True
    return VoxelMask.of(seeds)


def hard_negative_region(seeds: VoxelMask, neg: VoxelMask, iterations: int) -> VoxelMask:
    return dilate(seeds, iterations) & neg


def hard_negative_loss(
    features: Tensor,
    pos: VoxelMask,
    neg: VoxelMask,
    f_p: Tensor,
    count: int,
    iterations: int,
    eps: float = 1e-8,
) -> Tensor:
    """Mean ReLU similarity to f_p over the dilated hard-negative region; 0 when it is empty."""
    if pos.count == 0:
        raise ValueError("hard-negative mining needs at least one foreground voxel")
    seeds = mine_hard_negatives(features, neg, f_p, count, eps)
    region = hard_negative_region(seeds, neg, iterations)
    return _mean_positive_similarity(features, region, f_p, eps)
