"""Dual-resolution visual encoding and cross-attention fusion.

A strided convolutional stack encodes the high-resolution view, a small
patch-embedding transformer encodes the bilinearly downsampled view, and a
cross-attention block (queries from the low branch, keys/values from the
high branch) followed by a residual feed-forward fuses them into the image
prefix handed to the language model.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..imaging import ImageBuffer
from .attention import FeedForward, MultiHeadCrossAttention
from .config import EncoderConfig


@dataclass
class FeatureGrid:
    """Token grid: tokens have shape (batch, grid_h * grid_w, dim)."""

    tokens: torch.Tensor
    grid_h: int
    grid_w: int

    def __post_init__(self):
        if self.tokens.ndim != 3:
            raise ValueError(f"tokens must be (B, T, d), got {tuple(self.tokens.shape)}")
        if self.tokens.shape[1] != self.grid_h * self.grid_w:
            raise ValueError("token count does not match grid shape")
        if not torch.isfinite(self.tokens).all():
            raise ValueError("feature grid contains non-finite activations")

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[-1])

    @property
    def token_count(self) -> int:
        return int(self.tokens.shape[1])


def image_to_tensor(image: ImageBuffer, size: int | None = None) -> torch.Tensor:
    """ImageBuffer -> (1, 3, H, W) float tensor, optionally bilinearly resized."""
    x = torch.from_numpy(image.data.copy()).permute(2, 0, 1).unsqueeze(0)
    if size is not None and (x.shape[-2] != size or x.shape[-1] != size):
        x = F.interpolate(x, size=(size, size), mode="bilinear", align_corners=False)
    return x


def downsample(x: torch.Tensor, size: int) -> torch.Tensor:
    """Bilinear high->low downsampling."""
    return F.interpolate(x, size=(size, size), mode="bilinear", align_corners=False)


def _validate_image_tensor(x: torch.Tensor, expected: int, who: str):
    if x.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"{who} expects (B, 3, H, W), got {tuple(x.shape)}")
    if x.shape[-2] != expected or x.shape[-1] != expected:
        raise ValueError(f"{who} expects {expected}x{expected} input, got {x.shape[-2]}x{x.shape[-1]}")
    if not torch.isfinite(x).all():
        raise ValueError(f"{who} received non-finite pixels")


class HighResEncoder(nn.Module):
    """Strided conv stack: each stage halves the spatial grid."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        channels = [3] + [max(8, cfg.d_model >> (cfg.conv_stages - 1 - i)) for i in range(cfg.conv_stages)]
        channels[-1] = cfg.d_model
        layers = []
        for c_in, c_out in zip(channels, channels[1:]):
            conv = nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1)
            nn.init.zeros_(conv.bias)
            layers += [conv, nn.GELU()]
        self.stack = nn.Sequential(*layers[:-1])  # no activation after the last conv

    def forward(self, x: torch.Tensor) -> FeatureGrid:
        _validate_image_tensor(x, self.cfg.high_res, "high-res encoder")
        feats = self.stack(x)
        b, d, gh, gw = feats.shape
        return FeatureGrid(feats.flatten(2).transpose(1, 2), gh, gw)


class LowResEncoder(nn.Module):
    """Per-patch embedding plus a couple of self-attention blocks."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.patch = nn.Conv2d(3, cfg.d_model, kernel_size=cfg.patch_size, stride=cfg.patch_size)
        nn.init.zeros_(self.patch.bias)
        n_tokens = cfg.low_grid**2
        self.pos = nn.Parameter(torch.zeros(1, n_tokens, cfg.d_model))
        self.blocks = nn.ModuleList(
            [_SelfAttentionBlock(cfg.d_model, cfg.heads) for _ in range(cfg.low_blocks)]
        )

    def patch_tokens(self, x: torch.Tensor) -> torch.Tensor:
        """Patch embedding alone; permuting input patches permutes these rows."""
        _validate_image_tensor(x, self.cfg.low_res, "low-res encoder")
        return self.patch(x).flatten(2).transpose(1, 2)

    def forward(self, x: torch.Tensor) -> FeatureGrid:
        tokens = self.patch_tokens(x) + self.pos
        for block in self.blocks:
            tokens = block(tokens)
        g = self.cfg.low_grid
        return FeatureGrid(tokens, g, g)


class _SelfAttentionBlock(nn.Module):
    def __init__(self, d_model: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = MultiHeadCrossAttention(d_model, heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.ffn = FeedForward(d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h)
        return x + self.ffn(self.norm2(x))


class CrossAttentionFuser(nn.Module):
    """Fusion step: cross-attention (Q = low tokens, K = V = high tokens),
    then a 2-layer feed-forward added residually onto the attention output."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.attn = MultiHeadCrossAttention(cfg.d_model, cfg.heads)
        self.ffn = FeedForward(cfg.d_model, zero_init_out=True)

    def forward(self, low: FeatureGrid, high: FeatureGrid, return_weights: bool = False):
        if low.dim != high.dim:
            raise ValueError(f"feature dims differ: {low.dim} vs {high.dim}")
        if return_weights:
            attended, weights = self.attn(low.tokens, high.tokens, high.tokens, return_weights=True)
        else:
            attended = self.attn(low.tokens, high.tokens, high.tokens)
        fused = self.ffn(attended) + attended
        grid = FeatureGrid(fused, low.grid_h, low.grid_w)
        if return_weights:
            return grid, weights
        return grid


class DualEncoder(nn.Module):
    """Bundles both branches plus fusion; input is the high-res tensor."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.high = HighResEncoder(cfg)
        self.low = LowResEncoder(cfg)
        self.fuser = CrossAttentionFuser(cfg)

    def forward(self, x_high: torch.Tensor) -> FeatureGrid:
        high = self.high(x_high)
        low = self.low(downsample(x_high, self.cfg.low_res))
        return self.fuser(low, high)


def encode_high(encoder: HighResEncoder, image: ImageBuffer) -> FeatureGrid:
    # callers resize beforehand; a wrong-sized image is rejected here
    return encoder(image_to_tensor(image))


def encode_low(encoder: LowResEncoder, image: ImageBuffer) -> FeatureGrid:
    return encoder(image_to_tensor(image))
