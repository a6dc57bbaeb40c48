"""Segmentation metrics."""

from metrics.evaluation import (
    METRIC_NAMES,
    ConfusionCounts,
    confusion_counts,
    evaluate,
    evaluate_case,
    predict_masks,
    summarize,
)

__all__ = [
    "METRIC_NAMES",
    "ConfusionCounts",
    "confusion_counts",
    "evaluate",
    "evaluate_case",
    "predict_masks",
    "summarize",
]
