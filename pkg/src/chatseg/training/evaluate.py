"""Training-set probes: teacher-forced text loss and generated-mask CIoU."""

from __future__ import annotations

import numpy as np
import torch

from ..datagen.manifest import LoadedSample
from ..imaging import BinaryMask, resize_mask_nearest
from ..model.full import SegChatModel
from ..model.lm import render_turns
from ..model.vision import image_to_tensor
from .losses import text_loss


@torch.no_grad()
def teacher_forced_text_loss(model: SegChatModel, samples: list[LoadedSample]) -> float:
    """Mean assistant-token cross-entropy over the given samples."""
    model.eval()
    losses, weights = [], []
    for sample in samples:
        rendered = render_turns(sample.turns, model.tokenizer, model.n_img_tokens, model.config.lm.context)
        image = image_to_tensor(sample.image, size=model.config.encoder.high_res)
        logits, _ = model(image, rendered.tensor())
        mask = torch.tensor([rendered.loss_mask], dtype=torch.bool)
        n_tokens = int(mask[:, 1:].sum())
        losses.append(float(text_loss(logits[:, :-1], rendered.tensor()[:, 1:], mask[:, 1:])))
        weights.append(n_tokens)
    return float(np.average(losses, weights=weights))


@torch.no_grad()
def generation_ciou(model: SegChatModel, samples: list[LoadedSample]) -> dict:
    """Greedy-decode the final turn of every sample and score masks cumulatively.

    A sample that emits no usable span contributes its full ground-truth area
    to the union, i.e. scores zero rather than being skipped.
    """
    model.eval()
    high = model.config.encoder.high_res
    inter_sum, union_sum = 0, 0
    triggered = 0
    replays = []
    for sample in samples:
        image = image_to_tensor(sample.image, size=high)
        result = model.generate_reply(image, sample.turns[:-1])
        gt = resize_mask_nearest(sample.mask, high, high)
        if result.mask is not None:
            triggered += 1
            pred = result.mask
        else:
            pred = BinaryMask.zeros(high, high)
        inter_sum += int(np.logical_and(pred.bits, gt.bits).sum())
        union_sum += int(np.logical_or(pred.bits, gt.bits).sum())
        replays.append(result.text)
    return {
        "ciou": (inter_sum / union_sum) if union_sum else 1.0,
        "seg_trigger_rate": triggered / len(samples) if samples else 0.0,
        "responses": replays,
    }
