"""Harness I/O: volume files, synthetic phantoms, patch sampling and checkpoints."""

from services.checkpoints import CheckpointError, latest_checkpoint, load_checkpoint, save_checkpoint
from services.phantoms import gen_synthetic
from services.sampling import sample_batch, sample_patch
from services.volume_io import VolumeIOError, VolumeStore, load_volume, save_volume

__all__ = [
    "CheckpointError",
    "VolumeIOError",
    "VolumeStore",
    "gen_synthetic",
    "latest_checkpoint",
    "load_checkpoint",
    "load_volume",
    "sample_batch",
    "sample_patch",
    "save_checkpoint",
    "save_volume",
]
