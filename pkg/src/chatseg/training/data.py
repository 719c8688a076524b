"""Stage-specific training sample builders.

Stage 1 aligns masks with text on short referring-style exchanges mixed with
text-only VQA/caption slots in a 9:6:2:2 ratio; stage 2 fine-tunes on the
full multi-turn dialogues mixed 4:1 with VQA-style samples. Both stages draw
from the synthetic dataset, which keeps everything runnable offline.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..datagen.manifest import LoadedSample
from ..datagen.types import Turn, seg_response_text
from ..errors import ConfigError
from ..imaging import resize_mask_nearest
from ..model.full import SegChatModel
from ..model.lm import render_turns
from ..model.vision import image_to_tensor

STAGE1_RATIO = {"mask-text": 9, "region-text": 6, "vqa": 2, "caption": 2}
STAGE2_RATIO = {"dialogue": 4, "vqa": 1}


@dataclass
class TrainSample:
    sample_id: str
    kind: str
    image: torch.Tensor          # (3, H, W) at the model's high resolution
    ids: list[int]
    loss_mask: list[bool]
    mask: torch.Tensor | None    # (H, W) float target, None for text-only kinds


def _class_words(target_class: str) -> tuple[str, str]:
    words = target_class.split()
    color = words[0] if words else "plain"
    shape = words[-1] if len(words) > 1 else "object"
    return color, shape


def _turns_for_kind(kind: str, sample: LoadedSample) -> list[Turn]:
    color, shape = _class_words(sample.target_class)
    if kind == "dialogue":
        return list(sample.turns)
    if kind == "mask-text":
        return [
            Turn("user", f"please segment the {sample.target_class} ."),
            Turn("assistant", seg_response_text(sample.target_class)),
        ]
    if kind == "region-text":
        return [
            Turn("user", f"mark the {shape} that stands out ."),
            Turn("assistant", seg_response_text(sample.target_class)),
        ]
    if kind == "vqa":
        return [
            Turn("user", f"what does the {shape} look like ?"),
            Turn("assistant", f"it is a {color} {shape} ."),
        ]
    if kind == "caption":
        return [
            Turn("user", "describe the target briefly ."),
            Turn("assistant", f"the scene contains a {color} {shape} ."),
        ]
    raise ConfigError(f"unknown sample kind {kind!r}")


def _ratio_cycle(ratio: dict[str, int]) -> list[str]:
    # interleave kinds so short datasets still see every slot; the exact
    # ratio holds over each full cycle
    events = []
    for kind, count in ratio.items():
        for i in range(count):
            events.append(((i + 0.5) / count, kind))
    events.sort()
    return [kind for _, kind in events]


def _make_sample(kind: str, sample: LoadedSample, model: SegChatModel) -> TrainSample:
    high_res = model.config.encoder.high_res
    turns = _turns_for_kind(kind, sample)
    rendered = render_turns(turns, model.tokenizer, model.n_img_tokens, model.config.lm.context)
    mask_t = None
    if kind in ("dialogue", "mask-text", "region-text"):
        resized = resize_mask_nearest(sample.mask, high_res, high_res)
        mask_t = torch.from_numpy(resized.bits.copy()).float()
    return TrainSample(
        sample_id=f"{sample.sample_id}:{kind}",
        kind=kind,
        image=image_to_tensor(sample.image, size=high_res)[0],
        ids=rendered.ids,
        loss_mask=rendered.loss_mask,
        mask=mask_t,
    )


def build_stage_samples(stage: int, samples: list[LoadedSample], model: SegChatModel) -> list[TrainSample]:
    """Expand loaded dataset records into the stage's mixture of train samples.

    Stage 1 cycles every record through the four alignment slots in a 9:6:2:2
    schedule. Stage 2 keeps every record as a full dialogue and adds one
    VQA-style sample per four records (the 4:1 mixture)."""
    if not samples:
        raise ConfigError(f"stage {stage} received an empty dataset")

    out: list[TrainSample] = []
    if stage == 2:
        produced = {"dialogue": 0, "vqa": 0}
        for i, sample in enumerate(samples):
            out.append(_make_sample("dialogue", sample, model))
            produced["dialogue"] += 1
            if i % STAGE2_RATIO["dialogue"] == 0:
                out.append(_make_sample("vqa", sample, model))
                produced["vqa"] += 1
    else:
        cycle = _ratio_cycle(STAGE1_RATIO)
        produced = {kind: 0 for kind in STAGE1_RATIO}
        for i, sample in enumerate(samples):
            kind = cycle[i % len(cycle)]
            out.append(_make_sample(kind, sample, model))
            produced[kind] += 1

    missing = [kind for kind, count in produced.items() if count == 0]
    if missing:
        raise ConfigError(f"stage {stage} mixture missing component(s): {', '.join(missing)}")
    return out


def training_corpus(samples: list[LoadedSample]):
    """Every text either stage can render, for vocabulary building."""
    kinds = set(STAGE1_RATIO) | set(STAGE2_RATIO)
    for sample in samples:
        for kind in sorted(kinds):
            for turn in _turns_for_kind(kind, sample):
                yield turn.text


def collate(batch: list[TrainSample], pad_id: int = 0):
    """Right-pad token ids; padding never enters the loss mask."""
    max_len = max(len(s.ids) for s in batch)
    ids = torch.full((len(batch), max_len), pad_id, dtype=torch.long)
    mask = torch.zeros((len(batch), max_len), dtype=torch.bool)
    for row, s in enumerate(batch):
        ids[row, : len(s.ids)] = torch.tensor(s.ids, dtype=torch.long)
        mask[row, : len(s.loss_mask)] = torch.tensor(s.loss_mask, dtype=torch.bool)
    images = torch.stack([s.image for s in batch])
    return images, ids, mask
