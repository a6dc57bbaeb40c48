"""Cubic patch sampling with foreground oversampling."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from models.volume import VolumeRecord


def patch_corner(
    record: VolumeRecord, patch_extent: int, fg_bias: float, rng: np.random.Generator
) -> tuple[int, int, int]:
    """Pick the low corner of a patch.

    With probability ``fg_bias`` (and when the label has foreground) the patch is
    centered on a uniformly drawn foreground voxel and clamped into the volume;
    otherwise the corner is uniform over all valid corners.
    """
    if any(patch_extent > extent for extent in record.shape):
        raise ValueError(f"patch extent {patch_extent} exceeds volume {record.shape} of {record.id}")
    highs = [extent - patch_extent for extent in record.shape]
    if rng.random() < fg_bias and record.label.count:
        candidates = record.label.indices()
        voxel = np.unravel_index(candidates[rng.integers(candidates.size)], record.shape)
        return tuple(int(np.clip(v - patch_extent // 2, 0, high)) for v, high in zip(voxel, highs))  # type: ignore[return-value]
    return tuple(int(rng.integers(0, high + 1)) for high in highs)  # type: ignore[return-value]


def sample_patch(
    record: VolumeRecord, patch_extent: int, fg_bias: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Crop an (image, label) patch pair of side ``patch_extent``."""
    d, h, w = patch_corner(record, patch_extent, fg_bias, rng)
    window = (slice(d, d + patch_extent), slice(h, h + patch_extent), slice(w, w + patch_extent))
    return record.image[window].copy(), record.label.mask[window].copy()


def sample_batch(
    records: Sequence[VolumeRecord],
    batch_size: int,
    patch_extent: int,
    fg_bias: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``batch_size`` patches from uniformly chosen records.

    Returns:
        Images (B, 1, P, P, P) float32 and labels (B, P, P, P) bool
    """
    images, labels = [], []
    for _ in range(batch_size):
        record = records[int(rng.integers(len(records)))]
        image, label = sample_patch(record, patch_extent, fg_bias, rng)
        images.append(image)
        labels.append(label)
    return np.stack(images)[:, None], np.stack(labels)
