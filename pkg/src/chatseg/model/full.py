"""The assembled segmentation chat model."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..datagen.types import Turn
from ..imaging import BinaryMask
from .config import ModelConfig
from .lm import (
    ReasoningLm,
    SegExtraction,
    VisionProjector,
    extract_seg_states,
    greedy_decode,
    render_turns,
)
from .seghead import MaskDecoder, PixelEncoder, SemanticAligner, decode_mask
from .tokenizer import ASSISTANT, EOS, OBJ, SEG, Tokenizer
from .vision import DualEncoder


@dataclass
class GenerationResult:
    text: str
    new_ids: list[int]
    extraction: SegExtraction
    mask: BinaryMask | None = None
    mask_logits: torch.Tensor | None = None
    target_class: str | None = None

    @property
    def seg_triggered(self) -> bool:
        return self.mask is not None


class SegChatModel(nn.Module):
    """Dual vision encoder + LM + segmentation head, wired end to end."""

    def __init__(self, config: ModelConfig, tokenizer: Tokenizer):
        super().__init__()
        self.config = config
        self.tokenizer = tokenizer
        self.encoder = DualEncoder(config.encoder)
        self.projector = VisionProjector(config.encoder.d_model, config.lm.d_model)
        self.lm = ReasoningLm(config.lm, len(tokenizer))
        self.pixel_encoder = PixelEncoder(config.seg, config.encoder.high_res)
        self.aligner = SemanticAligner(config.seg, config.lm.d_model)
        self.mask_decoder = MaskDecoder(config.seg, config.encoder.high_res)

    # -- wiring ---------------------------------------------------------------

    @property
    def n_img_tokens(self) -> int:
        return self.config.encoder.low_grid**2

    def image_prefix(self, x_high: torch.Tensor) -> torch.Tensor:
        return self.projector(self.encoder(x_high).tokens)

    def forward(self, x_high: torch.Tensor, ids: torch.Tensor):
        """Teacher-forced pass: (logits, hidden) over the token sequence."""
        return self.lm(ids, self.image_prefix(x_high))

    def prompt_from_span(self, h_seg_seq: torch.Tensor, h_seg_query: torch.Tensor) -> torch.Tensor:
        return self.aligner(h_seg_seq, h_seg_query)

    def mask_logits_for(self, x_high: torch.Tensor, prompt: torch.Tensor) -> torch.Tensor:
        return self.mask_decoder(self.pixel_encoder(x_high), prompt)

    # -- freezing policy ------------------------------------------------------

    def trainable_modules(self, unfreeze_all: bool = False) -> dict[str, nn.Module]:
        """Mask decoder, both projection layers, and the alignment module are
        trainable; vision encoders and LM blocks stay frozen unless the
        desk-scale unfreeze-all escape hatch is used."""
        if unfreeze_all:
            return {
                "encoder": self.encoder,
                "projector": self.projector,
                "lm": self.lm,
                "pixel_encoder": self.pixel_encoder,
                "aligner": self.aligner,
                "mask_decoder": self.mask_decoder,
            }
        return {"projector": self.projector, "aligner": self.aligner, "mask_decoder": self.mask_decoder}

    def apply_freezing(self, unfreeze_all: bool = False) -> tuple[list[str], list[str]]:
        trainable_prefixes = tuple(self.trainable_modules(unfreeze_all))
        trainable, frozen = [], []
        for name, param in self.named_parameters():
            is_trainable = name.startswith(trainable_prefixes)
            param.requires_grad_(is_trainable)
            (trainable if is_trainable else frozen).append(name)
        return trainable, frozen

    # -- inference ------------------------------------------------------------

    @torch.no_grad()
    def generate_reply(
        self,
        x_high: torch.Tensor,
        history: list[Turn],
        max_new_tokens: int = 80,
        temperature: float = 0.0,
    ) -> GenerationResult:
        """Greedy-decode one assistant turn; if it emits a single
        `[OBJ]..[SEG]` span, decode the mask for it."""
        self.eval()
        budget = self.config.lm.context - max_new_tokens - 1
        rendered = render_turns(history, self.tokenizer, self.n_img_tokens, budget)
        prefix = self.image_prefix(x_high)
        seed_ids = rendered.ids + [ASSISTANT]
        new_ids = greedy_decode(self.lm, seed_ids, prefix, max_new_tokens, temperature)

        shown = [i for i in new_ids if i != EOS]
        text = self.tokenizer.decode(shown, skip_special=True)
        full = seed_ids + new_ids
        _, hidden = self.lm(torch.tensor([full], dtype=torch.long), prefix)
        extraction = extract_seg_states(hidden, full, start=len(seed_ids))
        result = GenerationResult(text=text, new_ids=new_ids, extraction=extraction)
        if extraction.ok:
            prompt = self.prompt_from_span(extraction.h_seg_seq, extraction.h_seg_query)
            logits, mask = decode_mask(self.mask_decoder, self.pixel_encoder(x_high), prompt)
            result.mask = mask
            result.mask_logits = logits
            i, j = extraction.span
            result.target_class = self.tokenizer.decode(full[i + 1 : j])
        return result


def build_model(config: ModelConfig, tokenizer: Tokenizer, seed: int = 0) -> SegChatModel:
    torch.manual_seed(seed)
    return SegChatModel(config, tokenizer)
