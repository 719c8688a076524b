"""Pixel-level encoding, semantic region alignment, and mask decoding.

The aligner collapses the variable-length `[OBJ]..[SEG]` hidden-state span
into a single prompt vector via single-query cross-attention. The decoder
runs two two-way attention blocks between that prompt and the pixel token
grid, takes the per-token affinity (dot product) with the updated prompt,
and learns to upsample the affinity map back to full image resolution.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import ChatsegError
from ..imaging import BinaryMask
from .attention import FeedForward, MultiHeadCrossAttention
from .config import SegConfig


class InferenceError(ChatsegError, RuntimeError):
    """Non-finite activations at inference time; the checkpoint is suspect."""


class PixelEncoder(nn.Module):
    """Small strided conv encoder producing the pixel token grid."""

    def __init__(self, cfg: SegConfig, image_size: int):
        super().__init__()
        self.cfg = cfg
        self.image_size = image_size
        stride = image_size // cfg.pixel_grid
        stages = int(math.log2(stride))
        channels = [3] + [max(8, cfg.d_seg >> (stages - 1 - i)) for i in range(stages)]
        channels[-1] = cfg.d_seg
        layers = []
        for c_in, c_out in zip(channels, channels[1:]):
            conv = nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1)
            nn.init.zeros_(conv.bias)
            layers += [conv, nn.GELU()]
        self.stack = nn.Sequential(*layers[:-1])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, grid*grid, d_seg)."""
        if x.shape[-2] != self.image_size or x.shape[-1] != self.image_size:
            raise ValueError(f"pixel encoder expects {self.image_size}^2 input, got {tuple(x.shape[-2:])}")
        feats = self.stack(x)
        return feats.flatten(2).transpose(1, 2)


class SemanticAligner(nn.Module):
    """Span states -> one prompt vector, whatever the span length.

    The LM-width states are projected to the segmentation width by a single
    affine map; the `[SEG]` state is the attention query, the full span the
    keys and values.
    """

    def __init__(self, cfg: SegConfig, d_lm: int):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Linear(d_lm, cfg.d_seg)
        self.attn = MultiHeadCrossAttention(cfg.d_seg, cfg.heads)

    def forward(self, h_seg_seq: torch.Tensor, h_seg_query: torch.Tensor, return_weights: bool = False):
        if h_seg_seq.ndim == 2:
            h_seg_seq = h_seg_seq.unsqueeze(0)
        if h_seg_query.ndim == 2:
            h_seg_query = h_seg_query.unsqueeze(0)
        if h_seg_seq.shape[1] < 1:
            raise ValueError("span is empty")
        q = self.proj(h_seg_query)
        kv = self.proj(h_seg_seq)
        if return_weights:
            out, weights = self.attn(q, kv, kv, return_weights=True)
            return out, weights
        return self.attn(q, kv, kv)


class _TwoWayBlock(nn.Module):
    """Prompt attends to features, features attend back, then a feed-forward
    over the features. Pre-norm residual form throughout."""

    def __init__(self, d: int, heads: int):
        super().__init__()
        self.norm_p1 = nn.LayerNorm(d)
        self.prompt_to_feats = MultiHeadCrossAttention(d, heads)
        self.norm_f1 = nn.LayerNorm(d)
        self.feats_to_prompt = MultiHeadCrossAttention(d, heads)
        self.norm_f2 = nn.LayerNorm(d)
        self.ffn = FeedForward(d)

    def forward(self, prompt: torch.Tensor, feats: torch.Tensor):
        prompt = prompt + self.prompt_to_feats(self.norm_p1(prompt), feats, feats)
        feats = feats + self.feats_to_prompt(self.norm_f1(feats), prompt, prompt)
        feats = feats + self.ffn(self.norm_f2(feats))
        return prompt, feats


class MaskDecoder(nn.Module):
    def __init__(self, cfg: SegConfig, image_size: int):
        super().__init__()
        self.cfg = cfg
        self.image_size = image_size
        self.blocks = nn.ModuleList([_TwoWayBlock(cfg.d_seg, cfg.heads) for _ in range(cfg.decoder_blocks)])
        stride = image_size // cfg.pixel_grid
        stages = int(math.log2(stride))
        ups = []
        ch = [1] + [cfg.upsample_channels] * (stages - 1) + [1]
        for i, (c_in, c_out) in enumerate(zip(ch, ch[1:])):
            conv = nn.ConvTranspose2d(c_in, c_out, kernel_size=2, stride=2)
            _init_offset_uniform(conv)
            ups.append(conv)
            if i < stages - 1:
                ups.append(nn.GELU())
        self.upsample = nn.Sequential(*ups)

    def affinity(self, pixel_tokens: torch.Tensor, prompt: torch.Tensor) -> torch.Tensor:
        """Run the two-way blocks and return the (B, grid, grid) affinity map."""
        feats = pixel_tokens
        for block in self.blocks:
            prompt, feats = block(prompt, feats)
        scores = (feats @ prompt.transpose(1, 2)).squeeze(-1)  # (B, N)
        g = self.cfg.pixel_grid
        return scores.view(-1, g, g)

    def forward(self, pixel_tokens: torch.Tensor, prompt: torch.Tensor) -> torch.Tensor:
        """(B, N, d_seg) x (B, 1, d_seg) -> full-resolution logits (B, H, W)."""
        if pixel_tokens.shape[-1] != prompt.shape[-1]:
            raise ValueError("pixel features and prompt disagree on d_seg")
        affinity = self.affinity(pixel_tokens, prompt)
        logits = self.upsample(affinity.unsqueeze(1)).squeeze(1)
        return logits


def _init_offset_uniform(conv: nn.ConvTranspose2d):
    """Make each 2x2 kernel constant across spatial offsets so a constant
    input stays constant; channels still differ to break symmetry."""
    with torch.no_grad():
        c_in, c_out = conv.weight.shape[0], conv.weight.shape[1]
        base = torch.randn(c_in, c_out) * (1.0 / math.sqrt(max(c_in, 1)))
        conv.weight.copy_(base.unsqueeze(-1).unsqueeze(-1).expand_as(conv.weight))
        nn.init.zeros_(conv.bias)


def decode_mask(decoder: MaskDecoder, pixel_tokens: torch.Tensor, prompt: torch.Tensor):
    """Full decode returning logits plus the thresholded mask (logit > 0)."""
    logits = decoder(pixel_tokens, prompt)
    if not torch.isfinite(logits).all():
        raise InferenceError("mask decoder produced non-finite logits")
    if logits.shape[0] != 1:
        raise ValueError("decode_mask expects a single-sample batch")
    mask = BinaryMask((logits[0] > 0).cpu().numpy())
    return logits, mask
