"""Overlap metrics between predicted and reference masks."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field

from models.reports import CaseMetrics, MetricsReport
from models.volume import VoxelMask
from tensor.tensor import ShapeError, Tensor

METRIC_NAMES = ("dice", "iou", "precision", "recall", "vs")


class ConfusionCounts(BaseModel):
    """Voxel confusion counts of one mask pair."""

    tp: int = Field(..., ge=0)
    fp: int = Field(..., ge=0)
    fn: int = Field(..., ge=0)
    tn: int = Field(..., ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_counts(pred: VoxelMask, gt: VoxelMask) -> ConfusionCounts:
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and reference {gt.shape} differ")
    p, g = pred.mask, gt.mask
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=p.size - tp - fp - fn)


def evaluate(pred: VoxelMask, gt: VoxelMask) -> dict[str, float]:
    """Dice, IoU, precision, recall and volumetric similarity.

    Empty denominators: dice, iou and vs are 1 (both masks empty). Precision
    with an empty prediction is 1 if the reference is empty too, else 0; recall
    with an empty reference is 1 if the prediction is empty too, else 0.
    """
    c = confusion_counts(pred, gt)
    union_terms = 2 * c.tp + c.fp + c.fn
    return {
        "dice": 2 * c.tp / union_terms if union_terms else 1.0,
        "iou": c.tp / (c.tp + c.fp + c.fn) if union_terms else 1.0,
        "precision": c.tp / (c.tp + c.fp) if c.tp + c.fp else float(c.fn == 0),
        "recall": c.tp / (c.tp + c.fn) if c.tp + c.fn else float(c.fp == 0),
        "vs": 1.0 - abs(c.fp - c.fn) / union_terms if union_terms else 1.0,
    }


def predict_masks(logits: Tensor | np.ndarray) -> list[VoxelMask]:
    """Hard foreground masks by argmax over the class axis of (B, K, D, H, W) logits."""
    array = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    if array.ndim != 5:
        raise ShapeError(f"expected (B, K, D, H, W) logits, got {array.shape}")
    return [VoxelMask.of(labels == 1) for labels in array.argmax(axis=1)]


def evaluate_case(case_id: str, pred: VoxelMask, gt: VoxelMask) -> CaseMetrics:
    return CaseMetrics(case_id=case_id, **evaluate(pred, gt))


def summarize(cases: Sequence[CaseMetrics], checkpoint: str | None = None) -> MetricsReport:
    """Attach per-metric means over ``cases``."""
    mean = {name: float(np.mean([getattr(c, name) for c in cases])) for name in METRIC_NAMES} if cases else {}
    return MetricsReport(checkpoint=checkpoint, cases=list(cases), mean=mean)
