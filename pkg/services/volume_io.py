"""Volume files: a JSON sidecar plus two raw little-endian C-order buffers."""

from __future__ import annotations

from pathlib import Path
from typing import List

import numpy as np
from loguru import logger
from pydantic import ValidationError

from models.volume import VolumeRecord, VoxelMask
from services.models import VOLUME_FORMAT_VERSION, DatasetIndex, VolumeMeta

INDEX_FILE = "dataset.json"


class VolumeIOError(OSError):
    """Raised when a volume or dataset file is missing, corrupt or inconsistent."""


def _sidecar_path(directory: Path, case_id: str) -> Path:
    return directory / f"{case_id}.json"


def save_volume(record: VolumeRecord, directory: str | Path) -> Path:
    """Write ``record`` as ``<id>.json``, ``<id>.image.raw`` and ``<id>.label.raw``.

    Returns:
        Path of the sidecar
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = VolumeMeta(
        id=record.id,
        shape=record.shape,
        spacing=record.spacing,
        image_file=f"{record.id}.image.raw",
        label_file=f"{record.id}.label.raw",
    )
    (directory / meta.image_file).write_bytes(record.image.astype("<f4").tobytes(order="C"))
    (directory / meta.label_file).write_bytes(record.label.mask.astype("|u1").tobytes(order="C"))
    sidecar = _sidecar_path(directory, record.id)
    sidecar.write_text(meta.model_dump_json(indent=2))
    logger.debug(f"Saved volume {record.id} {record.shape} to {directory}")
    return sidecar


def _read_buffer(path: Path, dtype: str, shape: tuple[int, int, int]) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise VolumeIOError(f"{path}: cannot read raw buffer: {e}") from e
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise VolumeIOError(f"{path}: size {len(raw)} bytes, expected {expected} for shape {shape}")
    return np.frombuffer(raw, dtype=dtype).reshape(shape, order="C")


def load_volume(path: str | Path) -> VolumeRecord:
    """Load a volume from its sidecar path.

    Raises:
        VolumeIOError: On a missing or corrupt sidecar, a size mismatch or non-binary labels
    """
    sidecar = Path(path)
    try:
        meta = VolumeMeta.model_validate_json(sidecar.read_text())
    except OSError as e:
        raise VolumeIOError(f"{sidecar}: cannot read sidecar: {e}") from e
    except ValidationError as e:
        raise VolumeIOError(f"{sidecar}: corrupt sidecar: {e.errors()[0]['msg']}") from e
    if meta.format_version != VOLUME_FORMAT_VERSION:
        raise VolumeIOError(f"{sidecar}: format version {meta.format_version} is not supported")

    image = _read_buffer(sidecar.parent / meta.image_file, meta.image_dtype, meta.shape)
    label = _read_buffer(sidecar.parent / meta.label_file, meta.label_dtype, meta.shape)
    try:
        mask = VoxelMask.of(label)
    except ValidationError as e:
        raise VolumeIOError(f"{sidecar.parent / meta.label_file}: labels must be 0 or 1") from e
    return VolumeRecord(id=meta.id, image=image.astype(np.float32), label=mask, spacing=meta.spacing)


class VolumeStore:
    """A dataset directory of volume files with a ``dataset.json`` index."""

    def __init__(self, root: str | Path):
        """Initialize the store.

        Args:
            root: Dataset directory; created on first write
        """
        self.root = Path(root)

    def case_ids(self) -> List[str]:
        """Case ids from the index, or from the sidecars present when no index exists."""
        index_path = self.root / INDEX_FILE
        if index_path.exists():
            return self.read_index().cases
        return sorted(p.stem for p in self.root.glob("*.json") if p.name != INDEX_FILE)

    def load(self, case_id: str) -> VolumeRecord:
        return load_volume(_sidecar_path(self.root, case_id))

    def load_all(self) -> List[VolumeRecord]:
        ids = self.case_ids()
        if not ids:
            raise VolumeIOError(f"{self.root}: no volumes found")
        records = [self.load(case_id) for case_id in ids]
        logger.info(f"Loaded {len(records)} volumes from {self.root}")
        return records

    def save(self, record: VolumeRecord) -> Path:
        return save_volume(record, self.root)

    def save_all(self, records: List[VolumeRecord], **index_fields: object) -> DatasetIndex:
        """Write every record plus the index; extra keyword fields go into the index."""
        for record in records:
            self.save(record)
        index = DatasetIndex(cases=[r.id for r in records], **index_fields)  # type: ignore[arg-type]
        (self.root / INDEX_FILE).write_text(index.model_dump_json(indent=2))
        logger.info(f"Wrote {len(records)} volumes and {INDEX_FILE} to {self.root}")
        return index

    def read_index(self) -> DatasetIndex:
        path = self.root / INDEX_FILE
        try:
            return DatasetIndex.model_validate_json(path.read_text())
        except OSError as e:
            raise VolumeIOError(f"{path}: cannot read index: {e}") from e
        except ValidationError as e:
            raise VolumeIOError(f"{path}: corrupt index: {e.errors()[0]['msg']}") from e
