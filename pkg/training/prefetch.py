"""Per-step patch batches, optionally produced ahead of time by a worker thread."""

from __future__ import annotations

import queue
import threading
from typing import Sequence

import numpy as np
from loguru import logger

from models.config import TrainConfig
from models.volume import VolumeRecord
from services.sampling import sample_batch

Batch = tuple[np.ndarray, np.ndarray]


def step_rng(seed: int, step: int) -> np.random.Generator:
    """The sampler stream of one optimizer step."""
    return np.random.default_rng(np.random.SeedSequence([seed, step]))


def batch_for_step(records: Sequence[VolumeRecord], cfg: TrainConfig, step: int) -> Batch:
    return sample_batch(records, cfg.batch_size, cfg.patch_extent, cfg.fg_bias, step_rng(cfg.seed, step))


class PatchPrefetcher:
    """Fills a bounded queue with the batches of steps ``start..stop-1`` in order.

    Every batch is drawn from its own step stream, so the data a step sees does
    not depend on the queue depth or on when the consumer asks.
    """

    def __init__(self, records: Sequence[VolumeRecord], cfg: TrainConfig, start: int, stop: int):
        self.records, self.cfg = records, cfg
        self.start, self.stop = start, stop
        self._queue: queue.Queue[tuple[int, Batch] | BaseException] = queue.Queue(maxsize=max(cfg.prefetch, 1))
        self._halt = threading.Event()
        self._thread = threading.Thread(target=self._fill, name="patch-prefetch", daemon=True)

    def __enter__(self) -> PatchPrefetcher:
        self._thread.start()
        logger.debug(f"Prefetching steps {self.start}..{self.stop - 1} (depth {self.cfg.prefetch})")
        return self

    def __exit__(self, *exc: object) -> None:
        self._halt.set()
        while not self._queue.empty():
            self._queue.get_nowait()
        self._thread.join(timeout=5.0)

    def _put(self, item: tuple[int, Batch] | BaseException) -> bool:
        while not self._halt.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def _fill(self) -> None:
        for step in range(self.start, self.stop):
            try:
                item: tuple[int, Batch] | BaseException = (step, batch_for_step(self.records, self.cfg, step))
            except Exception as e:
                item = e
            if not self._put(item) or isinstance(item, BaseException):
                return

    def get(self, step: int) -> Batch:
        item = self._queue.get()
        if isinstance(item, BaseException):
            raise item
        produced, batch = item
        if produced != step:
            raise RuntimeError(f"prefetcher produced step {produced}, trainer expected {step}")
        return batch
