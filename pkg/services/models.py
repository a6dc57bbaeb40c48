"""On-disk metadata models for volumes, datasets and checkpoints."""

from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field

VOLUME_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1


class VolumeMeta(BaseModel):
    """Sidecar describing one volume's raw buffers."""

    model_config = ConfigDict(extra="forbid")

    format_version: int = VOLUME_FORMAT_VERSION
    id: str = Field(..., min_length=1)
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    order: Literal["C"] = "C"
    image_dtype: Literal["<f4"] = "<f4"
    label_dtype: Literal["|u1"] = "|u1"
    image_file: str
    label_file: str


class DatasetIndex(BaseModel):
    """Index written next to a generated dataset."""

    model_config = ConfigDict(extra="forbid")

    format_version: int = VOLUME_FORMAT_VERSION
    cases: List[str] = Field(default_factory=list)
    extent: int | None = None
    seed: int | None = None
    difficulty: float | None = None


class CheckpointMeta(BaseModel):
    """JSON half of a checkpoint; arrays live in the matching .npz blob."""

    format_version: int = CHECKPOINT_FORMAT_VERSION
    step: int = Field(..., ge=0)
    epoch: int = Field(..., ge=0)
    seed: int = Field(..., ge=0)
    config: dict = Field(default_factory=dict)
    parameters: List[str] = Field(default_factory=list, description="Parameter names in layout order")
