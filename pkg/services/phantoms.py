"""Synthetic lesion phantoms: rotated ellipsoids in smoothed noise."""

from __future__ import annotations

from typing import List

import numpy as np
from loguru import logger
from scipy import ndimage
from scipy.spatial.transform import Rotation

from models.volume import VolumeRecord, VoxelMask

BACKGROUND_MEAN = 0.0
MIN_FOREGROUND, MAX_FOREGROUND = 0.01, 0.30
RADIUS_RANGE = (0.15, 0.30)
MAX_ATTEMPTS = 200


def contrast_for(difficulty: float) -> float:
    return 1.0 - 0.8 * difficulty


def noise_level_for(difficulty: float) -> float:
    return 0.5 * difficulty


def ellipsoid_union(extent: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean union of 1-3 randomly placed, sized and oriented ellipsoids."""
    grid = np.stack(np.meshgrid(*(np.arange(extent),) * 3, indexing="ij"), axis=-1).astype(np.float64)
    label = np.zeros((extent,) * 3, dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        radii = rng.uniform(*RADIUS_RANGE, size=3) * extent
        margin = RADIUS_RANGE[1] * extent
        center = rng.uniform(margin, extent - 1 - margin, size=3)
        rotation = Rotation.random(None, rng).as_matrix()
        local = (grid - center) @ rotation
        label |= ((local / radii) ** 2).sum(axis=-1) <= 1.0
    return label


def gen_case(case_id: str, extent: int, difficulty: float, rng: np.random.Generator) -> VolumeRecord:
    for attempt in range(MAX_ATTEMPTS):
        label = ellipsoid_union(extent, rng)
        if MIN_FOREGROUND <= label.mean() <= MAX_FOREGROUND:
            break
    else:
        raise RuntimeError(f"{case_id}: no phantom within the foreground range after {MAX_ATTEMPTS} tries")

    noise = ndimage.gaussian_filter(rng.standard_normal((extent,) * 3), sigma=1.0)
    noise /= max(float(noise.std()), 1e-12)
    image = BACKGROUND_MEAN + contrast_for(difficulty) * label + noise_level_for(difficulty) * noise
    logger.debug(f"{case_id}: foreground {label.mean():.3f} after {attempt + 1} draws")
    return VolumeRecord(id=case_id, image=image.astype(np.float32), label=VoxelMask.of(label))


def gen_synthetic(count: int, extent: int, seed: int, difficulty: float = 0.0) -> List[VolumeRecord]:
    """Generate ``count`` phantoms of side ``extent``.

    Case i draws from ``SeedSequence([seed, i])``, so a case does not depend on
    how many others are generated.

    Args:
        count: Number of volumes
        extent: Cube side in voxels
        seed: Dataset seed
        difficulty: 0 gives noiseless unit contrast; 1 gives contrast 0.2 under noise 0.5

    Returns:
        Records named ``case_000``, ``case_001``, ...
    """
    if not 0.0 <= difficulty <= 1.0:
        raise ValueError(f"difficulty must be in [0, 1], got {difficulty}")
    records = [
        gen_case(f"case_{i:03d}", extent, difficulty, np.random.default_rng(np.random.SeedSequence([seed, i])))
        for i in range(count)
    ]
    logger.info(f"Generated {count} synthetic volumes of extent {extent} (difficulty {difficulty})")
    return records
