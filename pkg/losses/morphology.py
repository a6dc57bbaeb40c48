"""Binary dilation of voxel masks."""

import numpy as np
from scipy import ndimage

from models.volume import VoxelMask

FULL_CONNECTIVITY = ndimage.generate_binary_structure(3, 3)


def dilate(mask: VoxelMask, iterations: int) -> VoxelMask:
    """Grow ``mask`` by ``iterations`` steps of the full 3x3x3 structuring element.

    The result is the Chebyshev ball of radius ``iterations`` around the set,
    clipped at the volume border. Zero iterations return the mask unchanged.
    """
    if iterations < 0:
        raise ValueError(f"dilation iterations must be >= 0, got {iterations}")
    if iterations == 0 or mask.count == 0:
        return mask
    grown = ndimage.binary_dilation(mask.mask, structure=FULL_CONNECTIVITY, iterations=iterations)
    return VoxelMask.of(np.asarray(grown, dtype=bool))
