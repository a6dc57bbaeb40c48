"""Segmentation losses and the region-aware feature loss."""

from losses.morphology import dilate
from losses.region import (
    ForegroundCenter,
    boundary_loss,
    boundary_region,
    cosine_similarity,
    foreground_center,
    hard_negative_loss,
    hard_negative_region,
    mine_hard_negatives,
    positive_compactness,
)
from losses.segmentation import ce_loss, dice_loss, label_batch
from losses.total import LossTerms, compute_losses, fr_loss, fr_loss_terms, total_loss

__all__ = [
    "ForegroundCenter",
    "LossTerms",
    "boundary_loss",
    "boundary_region",
    "ce_loss",
    "compute_losses",
    "cosine_similarity",
    "dice_loss",
    "dilate",
    "foreground_center",
    "fr_loss",
    "fr_loss_terms",
    "hard_negative_loss",
    "hard_negative_region",
    "label_batch",
    "mine_hard_negatives",
    "positive_compactness",
    "total_loss",
]
