"""Training loop and whole-volume evaluation."""

from __future__ import annotations

import contextlib
import time
from pathlib import Path
from typing import Callable, Iterator, List, Sequence

import numpy as np
from loguru import logger

from losses.total import LossTerms, compute_losses
from metrics.evaluation import evaluate_case, predict_masks, summarize
from models.config import RunConfig
from models.reports import MetricsReport
from models.state import TrainState
from models.volume import VolumeRecord
from network.unet import HCMAUNet, build
from services.checkpoints import load_checkpoint, save_checkpoint
from tensor.tensor import Tensor, default_dtype, no_grad
from training.adamw import AdamW
from training.prefetch import Batch, PatchPrefetcher, batch_for_step

STEP_FIELDS = ("step", "epoch", "lr", "loss", "ce", "dice", "fr", "l_pos", "l_boundary", "l_neg", "wall")


class Trainer:
    """Owns the model, optimizer state and patch stream of one run."""

    def __init__(self, config: RunConfig, records: Sequence[VolumeRecord]):
        """Initialize the trainer.

        Args:
            config: A checked run configuration
            records: Training volumes, at least as large as the patch
        """
        self.config = config
        self.records = list(records)
        self.dtype = config.train.dtype
        with default_dtype(self.dtype):
            self.model: HCMAUNet = build(config.model, seed=config.train.seed)
        self.optimizer = AdamW(
            dict(self.model.named_parameters()),
            lr=config.train.lr,
            betas=config.train.betas,
            eps=config.train.eps,
            weight_decay=config.train.weight_decay,
        )
        self.state = TrainState(seed=config.train.seed, config=config.model_dump(mode="json"))

    def resume(self, checkpoint: str | Path) -> None:
        """Continue from a checkpoint written by a run with the same config."""
        self.state = load_checkpoint(checkpoint, self.model)
        self.state.config = self.config.model_dump(mode="json")

    def train_step(self, batch: Batch) -> LossTerms:
        images, labels = batch
        with default_dtype(self.dtype):
            self.optimizer.zero_grad()
            logits, features = self.model(Tensor(images.astype(self.dtype)))
            terms = compute_losses(logits, features, labels, self.config.loss)
            terms.total.backward()
            self.optimizer.step(self.state)
        return terms

    @contextlib.contextmanager
    def _batches(self, stop: int) -> Iterator[Callable[[int], Batch]]:
        if self.config.train.prefetch > 0:
            with PatchPrefetcher(self.records, self.config.train, self.state.step, stop) as prefetcher:
                yield prefetcher.get
        else:
            yield lambda step: batch_for_step(self.records, self.config.train, step)

    @contextlib.contextmanager
    def _step_log(self) -> Iterator[None]:
        log_file = self.config.train.log_file
        if log_file is None:
            yield
            return
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        sink = logger.add(log_file, serialize=True, filter=lambda r: "step_record" in r["extra"])
        try:
            yield
        finally:
            logger.remove(sink)

    def run(self, steps: int | None = None) -> List[dict[str, float]]:
        """Train until ``steps`` (default ``train.steps``) optimizer steps have been taken.

        Returns:
            One record per step taken in this call, with the fields of STEP_FIELDS
        """
        cfg = self.config.train
        stop = cfg.steps if steps is None else steps
        history: List[dict[str, float]] = []
        start = time.perf_counter()
        logger.info(f"Training steps {self.state.step}..{stop - 1} on {len(self.records)} volumes")
        with self._step_log(), self._batches(stop) as next_batch:
            while self.state.step < stop:
                step = self.state.step
                terms = self.train_step(next_batch(step))
                self.state.epoch = self.state.step // cfg.steps_per_epoch
                record = {
                    "step": step,
                    "epoch": step // cfg.steps_per_epoch,
                    "lr": cfg.lr,
                    **terms.log_fields(),
                    "wall": time.perf_counter() - start,
                }
                history.append(record)
                if not all(np.isfinite(v) for v in record.values()):
                    raise FloatingPointError(f"non-finite loss at step {step}: {record}")
                line = " ".join(
                    f"{k}={record[k]:.6g}" if isinstance(record[k], float) else f"{k}={record[k]}"
                    for k in STEP_FIELDS
                )
                logger.bind(step_record=True, **record).info(line)
                if self.state.step % cfg.checkpoint_every == 0 or self.state.step == stop:
                    self.save()
        return history

    def save(self) -> Path:
        return save_checkpoint(self.config.train.checkpoint_dir, self.model, self.state)


def pad_to_multiple(image: np.ndarray, divisor: int) -> np.ndarray:
    pads = [(0, (-extent) % divisor) for extent in image.shape]
    return np.pad(image, pads) if any(p for _, p in pads) else image


def predict_logits(model: HCMAUNet, record: VolumeRecord, dtype: str = "float32") -> np.ndarray:
    """Whole-volume logits (1, K, D, H, W); the input is zero-padded to the stage divisor."""
    image = pad_to_multiple(record.image, model.config.min_divisor)
    with default_dtype(dtype), no_grad():
        logits, _ = model(Tensor(image[None, None].astype(dtype)))
    d, h, w = record.shape
    return logits.data[:, :, :d, :h, :w]


def evaluate_records(
    model: HCMAUNet, records: Sequence[VolumeRecord], checkpoint: str | None = None, dtype: str = "float32"
) -> MetricsReport:
    """Metrics of argmax predictions against every record's label."""
    cases = []
    for record in records:
        (pred,) = predict_masks(predict_logits(model, record, dtype))
        case = evaluate_case(record.id, pred, record.label)
        logger.info(
            f"{record.id}: dice={case.dice:.4f} iou={case.iou:.4f} precision={case.precision:.4f} "
            f"recall={case.recall:.4f} vs={case.vs:.4f}"
        )
        cases.append(case)
    return summarize(cases, checkpoint)
