"""Checkpoints: an .npz blob of parameters and AdamW moments plus a JSON sidecar."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from loguru import logger
from pydantic import ValidationError

from models.state import TrainState
from network.module import Module
from services.models import CHECKPOINT_FORMAT_VERSION, CheckpointMeta


class CheckpointError(RuntimeError):
    """Raised when a checkpoint is unreadable or was written by another format version."""


def checkpoint_stem(directory: str | Path, step: int) -> Path:
    return Path(directory) / f"step_{step:06d}"


def save_checkpoint(directory: str | Path, model: Module, state: TrainState) -> Path:
    """Write ``step_<n>.npz`` and ``step_<n>.json``; returns the JSON path."""
    stem = checkpoint_stem(directory, state.step)
    stem.parent.mkdir(parents=True, exist_ok=True)
    params = model.state_dict()
    state.check_moments(params)
    arrays = {f"param/{name}": value for name, value in params.items()}
    arrays.update({f"exp_avg/{name}": value for name, value in state.exp_avg.items()})
    arrays.update({f"exp_avg_sq/{name}": value for name, value in state.exp_avg_sq.items()})
    np.savez(stem.with_suffix(".npz"), **arrays)  # type: ignore[arg-type]
    meta = CheckpointMeta(
        step=state.step,
        epoch=state.epoch,
        seed=state.seed,
        config=state.config,
        parameters=list(params),
    )
    sidecar = stem.with_suffix(".json")
    sidecar.write_text(meta.model_dump_json(indent=2))
    logger.info(f"Checkpoint written: {sidecar}")
    return sidecar


def load_checkpoint(path: str | Path, model: Module) -> TrainState:
    """Restore parameters into ``model`` and return the training state.

    Args:
        path: The checkpoint's JSON sidecar (the .npz must sit next to it)
        model: A network built from the same config

    Raises:
        CheckpointError: On unreadable files, a version mismatch or a parameter layout mismatch
    """
    sidecar = Path(path).with_suffix(".json")
    try:
        meta = CheckpointMeta.model_validate_json(sidecar.read_text())
    except (OSError, ValidationError) as e:
        logger.error(f"Cannot read checkpoint {sidecar}")
        raise CheckpointError(f"{sidecar}: unreadable checkpoint: {e}") from e
    if meta.format_version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{sidecar}: format version {meta.format_version}, expected {CHECKPOINT_FORMAT_VERSION}"
        )
    try:
        with np.load(sidecar.with_suffix(".npz")) as blob:
            arrays = {key: blob[key] for key in blob.files}
    except (OSError, ValueError) as e:
        logger.error(f"Cannot read checkpoint blob next to {sidecar}")
        raise CheckpointError(f"{sidecar.with_suffix('.npz')}: unreadable blob: {e}") from e

    def group(prefix: str) -> dict[str, np.ndarray]:
        return {key[len(prefix) :]: value for key, value in arrays.items() if key.startswith(prefix)}

    params = group("param/")
    if list(params) != meta.parameters:
        raise CheckpointError(f"{sidecar}: parameter names in blob and sidecar disagree")
    try:
        model.load_state_dict(params)
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"{sidecar}: does not fit this network: {e}") from e

    state = TrainState(
        step=meta.step,
        epoch=meta.epoch,
        seed=meta.seed,
        config=meta.config,
        exp_avg=group("exp_avg/"),
        exp_avg_sq=group("exp_avg_sq/"),
    )
    state.check_moments(model.state_dict())
    logger.info(f"Restored checkpoint {sidecar} at step {meta.step}")
    return state


def latest_checkpoint(directory: str | Path) -> Path | None:
    sidecars = sorted(Path(directory).glob("step_*.json"))
    return sidecars[-1] if sidecars else None
