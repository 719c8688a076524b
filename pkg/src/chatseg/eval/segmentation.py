"""Segmentation metrics: pixel-wise precision/recall/F1 and cumulative IoU."""

from __future__ import annotations

import numpy as np

from ..imaging import BinaryMask, mask_intersection_union


def pixel_prf(pred: BinaryMask, gt: BinaryMask) -> dict:
    """Per-pixel precision, recall and F1 with zero-denominator conventions.

    precision = TP/(TP+FP), recall = TP/(TP+FN); a metric is 0 whenever its
    denominator is 0, and F1 is 0 when P + R is 0.
    """
    if pred.bits.shape != gt.bits.shape:
        raise ValueError(
            f"mask dimensions differ: {pred.width}x{pred.height} vs {gt.width}x{gt.height}"
        )
    tp = int(np.logical_and(pred.bits, gt.bits).sum())
    fp = int(np.logical_and(pred.bits, ~gt.bits).sum())
    fn = int(np.logical_and(~pred.bits, gt.bits).sum())
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def ciou(preds: list[BinaryMask], gts: list[BinaryMask]) -> float:
    """Cumulative IoU: dataset-summed intersection over dataset-summed union."""
    if not preds or not gts:
        raise ValueError("ciou needs at least one mask pair")
    if len(preds) != len(gts):
        raise ValueError(f"list lengths differ: {len(preds)} vs {len(gts)}")
    inter_sum, union_sum = 0, 0
    for p, g in zip(preds, gts):
        inter, union = mask_intersection_union(p, g)
        inter_sum += inter
        union_sum += union
    if union_sum == 0:
        return 1.0
    return inter_sum / union_sum


def mean_iou(preds: list[BinaryMask], gts: list[BinaryMask]) -> float:
    """Per-sample-averaged IoU, reported alongside the cumulative number."""
    if not preds or len(preds) != len(gts):
        raise ValueError("aligned non-empty lists required")
    values = []
    for p, g in zip(preds, gts):
        inter, union = mask_intersection_union(p, g)
        values.append(1.0 if union == 0 else inter / union)
    return float(np.mean(values))
