"""Optimization: AdamW, the patch stream and the training loop."""

from training.adamw import AdamW, adamw_step
from training.prefetch import PatchPrefetcher, batch_for_step, step_rng
from training.trainer import STEP_FIELDS, Trainer, evaluate_records, predict_logits

__all__ = [
    "AdamW",
    "PatchPrefetcher",
    "STEP_FIELDS",
    "Trainer",
    "adamw_step",
    "batch_for_step",
    "evaluate_records",
    "predict_logits",
    "step_rng",
]
