"""Joint training objective: text cross-entropy plus weighted BCE and DICE
mask terms, combined as lambda_t * L_t + lambda_bce * BCE + lambda_dice * DICE."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
import torch.nn.functional as F

logger = logging.getLogger("chatseg.training")

DICE_EPS = 1.0


@dataclass
class LossWeights:
    lambda_t: float = 1.0
    lambda_bce: float = 2.0
    lambda_dice: float = 0.5

    def __post_init__(self):
        if min(self.lambda_t, self.lambda_bce, self.lambda_dice) < 0:
            raise ValueError("loss weights must be non-negative")


def text_loss(logits: torch.Tensor, targets: torch.Tensor, loss_mask: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy over the positions marked in `loss_mask`.

    The mask is expected to cover assistant tokens only; a fully masked-out
    batch contributes zero (with a warning) rather than NaN.
    """
    if logits.shape[:-1] != targets.shape or targets.shape != loss_mask.shape:
        raise ValueError("logits/targets/mask shapes disagree")
    flat_mask = loss_mask.reshape(-1).bool()
    if not flat_mask.any():
        logger.warning("text loss invoked with an empty loss mask")
        return logits.sum() * 0.0
    flat_logits = logits.reshape(-1, logits.shape[-1])[flat_mask]
    flat_targets = targets.reshape(-1)[flat_mask]
    return F.cross_entropy(flat_logits, flat_targets)


def bce_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean per-pixel binary cross-entropy on logits (log-sum-exp stable form)."""
    if logits.shape != target.shape:
        raise ValueError(f"logit/target shapes differ: {tuple(logits.shape)} vs {tuple(target.shape)}")
    target = target.to(logits.dtype)
    return (logits.clamp_min(0) - logits * target + torch.log1p(torch.exp(-logits.abs()))).mean()


def dice_loss(logits: torch.Tensor, target: torch.Tensor, eps: float = DICE_EPS) -> torch.Tensor:
    """1 - (2 * sum(p*m) + eps) / (sum(p) + sum(m) + eps) with p = sigmoid(logits).

    Computed per sample and averaged when a batch dimension is present.
    """
    if logits.shape != target.shape:
        raise ValueError(f"logit/target shapes differ: {tuple(logits.shape)} vs {tuple(target.shape)}")
    target = target.to(logits.dtype)
    probs = torch.sigmoid(logits)
    if logits.ndim == 2:
        probs, target = probs.unsqueeze(0), target.unsqueeze(0)
    p = probs.flatten(1)
    m = target.flatten(1)
    score = (2.0 * (p * m).sum(dim=1) + eps) / (p.sum(dim=1) + m.sum(dim=1) + eps)
    return (1.0 - score).mean()


def total_loss(parts: dict[str, torch.Tensor], weights: LossWeights) -> torch.Tensor:
    """Weighted sum of the three parts; rejects non-finite inputs."""
    text = parts["text"]
    bce = parts["bce"]
    dice = parts["dice"]
    for name, value in (("text", text), ("bce", bce), ("dice", dice)):
        v = value if isinstance(value, torch.Tensor) else torch.as_tensor(value)
        if not torch.isfinite(v).all():
            raise ValueError(f"non-finite {name} loss")
    return weights.lambda_t * text + weights.lambda_bce * bce + weights.lambda_dice * dice
