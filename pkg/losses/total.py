"""Feature loss over a batch and the combined training objective."""

from __future__ import annotations

from loguru import logger
from pydantic import BaseModel, ConfigDict

import functions as F
from losses.region import (
    boundary_loss,
    foreground_center,
    hard_negative_loss,
    positive_compactness,
    zero_like,
)
from losses.segmentation import Labels, ce_loss, dice_loss, label_batch
from models.config import LossConfig
from models.volume import VoxelMask
from tensor.tensor import ShapeError, Tensor


class LossTerms(BaseModel):
    """The differentiable total plus per-term values for logging."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    total: Tensor
    ce: float = 0.0
    dice: float = 0.0
    fr: float = 0.0
    l_pos: float = 0.0
    l_boundary: float = 0.0
    l_neg: float = 0.0

    def log_fields(self) -> dict[str, float]:
        return {"loss": self.total.item(), **self.model_dump(exclude={"total"})}


def fr_loss_terms(features: Tensor, labels: Labels, cfg: LossConfig) -> tuple[Tensor, dict[str, float]]:
    """Batch feature loss and its batch-averaged per-term values.

    Samples without foreground contribute 0 but still count in the batch mean.
    """
    y = label_batch(labels)
    if features.ndim != 5 or features.shape[0] != y.shape[0] or features.shape[2:] != y.shape[1:]:
        raise ShapeError(f"features {features.shape} do not match labels {y.shape}")
    batch = features.shape[0]
    totals = {"l_pos": 0.0, "l_boundary": 0.0, "l_neg": 0.0}
    per_sample: list[Tensor] = []
    for b in range(batch):
        pos = VoxelMask.of(y[b])
        center = foreground_center(features[b], pos, detach=not cfg.fp_grad)
        if center is None:
            logger.warning(f"Sample {b} has no foreground; feature loss skipped")
            continue
        neg = pos.complement()
        f_b, f_p = features[b], center.f_p
        terms: dict[str, Tensor] = {}
        if cfg.use_pos:
            terms["l_pos"] = positive_compactness(f_b, pos, f_p, cfg.eps)
        if cfg.use_boundary:
            terms["l_boundary"] = boundary_loss(f_b, pos, neg, f_p, cfg.boundary_iterations, cfg.eps)
        if cfg.use_neg:
            terms["l_neg"] = hard_negative_loss(
                f_b, pos, neg, f_p, cfg.num_hard_negatives, cfg.negative_iterations, cfg.eps
            )
        sample: Tensor | None = None
        for name, value in terms.items():
            totals[name] += value.item() / batch
            sample = value if sample is None else sample + value
        if sample is not None:
            per_sample.append(sample)
    if not per_sample:
        return zero_like(features), totals
    loss = per_sample[0]
    for sample in per_sample[1:]:
        loss = loss + sample
    return loss * (1.0 / batch), totals


def fr_loss(features: Tensor, labels: Labels, cfg: LossConfig) -> Tensor:
    """Positive + boundary + hard-negative terms per sample, averaged over the batch."""
    return fr_loss_terms(features, labels, cfg)[0]


def compute_losses(logits: Tensor, features: Tensor, labels: Labels, cfg: LossConfig) -> LossTerms:
    """ce_weight * CE + dice_weight * Dice + fr_weight * FR, with the parts for logging."""
    ce = ce_loss(logits, labels)
    dice = dice_loss(F.softmax(logits, axis=1), labels, cfg.eps)
    total = ce * cfg.ce_weight + dice * cfg.dice_weight
    fr_value, parts = 0.0, {"l_pos": 0.0, "l_boundary": 0.0, "l_neg": 0.0}
    if cfg.fr_weight > 0:
        fr, parts = fr_loss_terms(features, labels, cfg)
        fr_value = fr.item()
        total = total + fr * cfg.fr_weight
    return LossTerms(total=total, ce=ce.item(), dice=dice.item(), fr=fr_value, **parts)


def total_loss(logits: Tensor, features: Tensor, labels: Labels, cfg: LossConfig) -> Tensor:
    return compute_losses(logits, features, labels, cfg).total
