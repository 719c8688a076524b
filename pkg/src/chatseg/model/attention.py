"""Multi-head scaled dot-product cross-attention used across the model."""

from __future__ import annotations

import math

import torch
from torch import nn


class MultiHeadCrossAttention(nn.Module):
    """Standard multi-head attention with 1/sqrt(d_head) scaling.

    Returns both the output tokens and the per-head attention weights so
    callers (and tests) can inspect the softmax rows.
    """

    def __init__(self, d_model: int, heads: int, d_kv: int | None = None):
        super().__init__()
        if d_model % heads != 0:
            raise ValueError(f"d_model={d_model} not divisible by heads={heads}")
        self.d_model = d_model
        self.heads = heads
        self.d_head = d_model // heads
        d_kv = d_kv or d_model
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_kv, d_model)
        self.v_proj = nn.Linear(d_kv, d_model)
        self.out_proj = nn.Linear(d_model, d_model)

    def forward(
        self,
        query: torch.Tensor,
        key: torch.Tensor,
        value: torch.Tensor,
        attn_mask: torch.Tensor | None = None,
        return_weights: bool = False,
    ):
        b, tq, _ = query.shape
        tk = key.shape[1]
        q = self.q_proj(query).view(b, tq, self.heads, self.d_head).transpose(1, 2)
        k = self.k_proj(key).view(b, tk, self.heads, self.d_head).transpose(1, 2)
        v = self.v_proj(value).view(b, tk, self.heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if attn_mask is not None:
            scores = scores.masked_fill(attn_mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(b, tq, self.d_model)
        out = self.out_proj(out)
        if return_weights:
            return out, weights
        return out


class FeedForward(nn.Module):
    """2-layer MLP with a GELU gate; optional zero-init of the output layer
    so residual branches start as the identity."""

    def __init__(self, d_model: int, hidden: int | None = None, zero_init_out: bool = False):
        super().__init__()
        hidden = hidden or 4 * d_model
        self.fc1 = nn.Linear(d_model, hidden)
        self.fc2 = nn.Linear(hidden, d_model)
        self.act = nn.GELU()
        if zero_init_out:
            nn.init.zeros_(self.fc2.weight)
            nn.init.zeros_(self.fc2.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))
