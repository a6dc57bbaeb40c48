"""Volume and voxel-mask models."""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class VoxelMask(BaseModel):
    """Binary volume over (D, H, W)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mask: np.ndarray = Field(..., description="Boolean (D, H, W) array")

    @field_validator("mask", mode="before")
    @classmethod
    def _binary(cls, value: object) -> np.ndarray:
        array = np.asarray(value)
        if array.ndim != 3:
            raise ValueError(f"mask must be 3-D, got shape {array.shape}")
        if array.dtype != np.bool_:
            if not np.isin(array, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
            array = array.astype(bool)
        return np.ascontiguousarray(array)

    @classmethod
    def of(cls, array: object) -> VoxelMask:
        return cls(mask=array)  # type: ignore[arg-type]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.mask.shape  # type: ignore[return-value]

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def indices(self) -> np.ndarray:
        """Linear C-order voxel indices of the set, ascending."""
        return np.flatnonzero(self.mask)

    def complement(self) -> VoxelMask:
        return VoxelMask(mask=~self.mask)

    def __and__(self, other: VoxelMask) -> VoxelMask:
        return VoxelMask(mask=self.mask & other.mask)

    def __or__(self, other: VoxelMask) -> VoxelMask:
        return VoxelMask(mask=self.mask | other.mask)

    def issubset(self, other: VoxelMask) -> bool:
        return bool(np.all(other.mask[self.mask]))


class VolumeRecord(BaseModel):
    """An image/label pair with shape metadata."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    id: str = Field(..., min_length=1, description="Case identifier")
    image: np.ndarray = Field(..., description="float32 (D, H, W) intensities")
    label: VoxelMask = Field(..., description="Ground-truth lesion mask")
    spacing: tuple[float, float, float] = Field((1.0, 1.0, 1.0), description="Voxel spacing, metadata only")

    @field_validator("image", mode="before")
    @classmethod
    def _image(cls, value: object) -> np.ndarray:
        array = np.ascontiguousarray(value, dtype=np.float32)
        if array.ndim != 3:
            raise ValueError(f"image must be 3-D, got shape {array.shape}")
        return array

    @model_validator(mode="after")
    def _shapes_match(self) -> VolumeRecord:
        if self.image.shape != self.label.shape:
            raise ValueError(f"image {self.image.shape} and label {self.label.shape} differ")
        return self

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.image.shape  # type: ignore[return-value]

    @property
    def foreground_fraction(self) -> float:
        return self.label.count / self.image.size
