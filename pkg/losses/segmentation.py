"""Soft Dice and cross-entropy over class logits."""

from __future__ import annotations

from typing import Sequence

import numpy as np

import functions as F
from models.volume import VoxelMask
from tensor.tensor import ShapeError, Tensor

Labels = Sequence[VoxelMask] | np.ndarray


def label_batch(labels: Labels) -> np.ndarray:
    """Stack labels into a boolean (B, D, H, W) array."""
    if isinstance(labels, np.ndarray):
        array = labels.astype(bool) if labels.dtype != np.bool_ else labels
    else:
        array = np.stack([mask.mask for mask in labels])
    if array.ndim != 4:
        raise ShapeError(f"labels must be (B, D, H, W), got {array.shape}")
    return array


def _check(prediction: Tensor, labels: np.ndarray) -> None:
    if prediction.ndim != 5 or prediction.shape[0] != labels.shape[0] or prediction.shape[2:] != labels.shape[1:]:
        raise ShapeError(f"prediction {prediction.shape} does not match labels {labels.shape}")


def dice_loss(probs: Tensor, labels: Labels, eps: float = 1e-8) -> Tensor:
    """Soft Dice on the foreground channel, averaged over the batch.

    Args:
        probs: (B, K, D, H, W) class probabilities; channel 1 is foreground
        labels: Ground-truth foreground masks
        eps: Added to numerator and denominator; empty prediction and label give 0

    Returns:
        Scalar loss in [0, 1]
    """
    y = label_batch(labels)
    _check(probs, y)
    p_fg = probs[:, 1]
    target = Tensor(y.astype(probs.dtype))
    axes = (1, 2, 3)
    overlap = (p_fg * target).sum(axis=axes)
    denom = p_fg.sum(axis=axes) + Tensor(target.data.sum(axis=axes)) + eps
    return (1.0 - (2.0 * overlap + eps) / denom).mean()


def ce_loss(logits: Tensor, labels: Labels) -> Tensor:
    """Mean per-voxel negative log-likelihood of the true class."""
    y = label_batch(labels)
    _check(logits, y)
    one_hot = np.zeros(logits.shape, dtype=logits.dtype)
    np.put_along_axis(one_hot, y.astype(np.intp)[:, None], 1.0, axis=1)
    log_probs = F.log_softmax(logits, axis=1)
    return -(log_probs * Tensor(one_hot)).sum(axis=1).mean()
