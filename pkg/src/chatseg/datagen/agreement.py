"""Inter-annotator agreement over aligned mask sets: mean IoU + Cohen's Kappa."""

from __future__ import annotations

import numpy as np

from ..imaging import BinaryMask, mask_iou


def cohens_kappa(annotations_a: list[BinaryMask], annotations_b: list[BinaryMask]) -> float:
    """Kappa over the pooled per-pixel binary labels of both annotators.

    kappa = (p_o - p_e) / (1 - p_e) with p_o the observed per-pixel agreement
    and p_e the chance agreement from each annotator's marginal rate.
    Returns 1.0 when chance agreement is already perfect.
    """
    a = np.concatenate([m.bits.ravel() for m in annotations_a])
    b = np.concatenate([m.bits.ravel() for m in annotations_b])
    p_o = float(np.mean(a == b))
    pa, pb = float(a.mean()), float(b.mean())
    p_e = pa * pb + (1.0 - pa) * (1.0 - pb)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def agreement_report(annotations_a: list[BinaryMask], annotations_b: list[BinaryMask]) -> dict:
    """Mean pairwise IoU plus pooled-pixel Kappa for two aligned annotation sets."""
    if not annotations_a or not annotations_b:
        raise ValueError("annotation lists must be non-empty")
    if len(annotations_a) != len(annotations_b):
        raise ValueError(f"annotation lists differ in length: {len(annotations_a)} vs {len(annotations_b)}")
    ious = [mask_iou(a, b) for a, b in zip(annotations_a, annotations_b)]
    return {
        "mean_iou": float(np.mean(ious)),
        "kappa": cohens_kappa(annotations_a, annotations_b),
    }
