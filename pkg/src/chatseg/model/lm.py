"""Decoder-only language model over projected image tokens plus dialogue text.

Prompt layout: an `[IMG]` placeholder per fused image token, then each turn as
`<user>`/`<assistant>` marker + words + `<eos>`. The assistant's segmentation
reply embeds `[OBJ] {class words} [SEG]`, and the hidden states of that span
drive the mask decoder downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..datagen.types import DialogueSample, Turn
from .attention import FeedForward, MultiHeadCrossAttention
from .config import LmConfig
from .tokenizer import ASSISTANT, EOS, IMG, OBJ, SEG, USER, Tokenizer


@dataclass
class RenderedPrompt:
    ids: list[int]
    loss_mask: list[bool]  # True on assistant content (words + trailing <eos>)
    n_img: int

    def tensor(self, device=None) -> torch.Tensor:
        return torch.tensor(self.ids, dtype=torch.long, device=device).unsqueeze(0)


def _turn_ids(turn: Turn, tokenizer: Tokenizer) -> tuple[list[int], list[bool]]:
    marker = USER if turn.role == "user" else ASSISTANT
    body = tokenizer.encode(turn.text)
    ids = [marker] + body + [EOS]
    is_assistant = turn.role == "assistant"
    mask = [False] + [is_assistant] * (len(body) + 1)
    return ids, mask


def render_turns(
    turns: list[Turn], tokenizer: Tokenizer, n_img: int, context: int
) -> RenderedPrompt:
    """Render dialogue turns to token ids, evicting the oldest user/assistant
    pair when the context overflows. The final two turns are never dropped."""
    turns = list(turns)
    while True:
        ids: list[int] = [IMG] * n_img
        mask: list[bool] = [False] * n_img
        for turn in turns:
            t_ids, t_mask = _turn_ids(turn, tokenizer)
            ids.extend(t_ids)
            mask.extend(t_mask)
        if len(ids) <= context:
            return RenderedPrompt(ids=ids, loss_mask=mask, n_img=n_img)
        if len(turns) <= 2:
            raise ValueError(f"prompt does not fit the context ({len(ids)} > {context})")
        turns = turns[2:]


def render_prompt(sample: DialogueSample, tokenizer: Tokenizer, n_img: int, context: int) -> RenderedPrompt:
    if not sample.target_class.strip():
        raise ValueError("sample has an empty target class")
    return render_turns(sample.turns, tokenizer, n_img, context)


class VisionProjector(nn.Module):
    """2-layer GELU MLP mapping vision width to LM width."""

    def __init__(self, d_vision: int, d_lm: int):
        super().__init__()
        self.fc1 = nn.Linear(d_vision, d_lm)
        self.fc2 = nn.Linear(d_lm, d_lm)
        self.act = nn.GELU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class _DecoderBlock(nn.Module):
    def __init__(self, d_model: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = MultiHeadCrossAttention(d_model, heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.ffn = FeedForward(d_model)

    def forward(self, x: torch.Tensor, causal_mask: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, attn_mask=causal_mask)
        return x + self.ffn(self.norm2(x))


class ReasoningLm(nn.Module):
    def __init__(self, cfg: LmConfig, vocab_size: int):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.tok_emb = nn.Embedding(vocab_size, cfg.d_model)
        self.pos_emb = nn.Parameter(torch.zeros(1, cfg.context, cfg.d_model))
        self.blocks = nn.ModuleList([_DecoderBlock(cfg.d_model, cfg.heads) for _ in range(cfg.layers)])
        self.norm_f = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, vocab_size)

    def forward(self, ids: torch.Tensor, prefix: torch.Tensor | None = None):
        """Causal next-token logits plus final-layer hidden states.

        `prefix` carries the projected image tokens substituted at the [IMG]
        placeholder positions (one per prefix token, in order).
        """
        if ids.ndim != 2:
            raise ValueError(f"ids must be (B, L), got {tuple(ids.shape)}")
        if int(ids.max()) >= self.vocab_size or int(ids.min()) < 0:
            raise ValueError("token id out of vocabulary range")
        b, length = ids.shape
        if length > self.cfg.context:
            raise ValueError(f"sequence length {length} exceeds context {self.cfg.context}")

        x = self.tok_emb(ids)
        if prefix is not None:
            img_pos = ids == IMG
            expected = b * prefix.shape[1]
            if int(img_pos.sum()) != expected:
                raise ValueError(
                    f"prefix has {prefix.shape[1]} tokens per row but ids carry {int(img_pos.sum())} [IMG] slots"
                )
            x = x.masked_scatter(img_pos.unsqueeze(-1), prefix.reshape(-1, prefix.shape[-1]).to(x.dtype))
        x = x + self.pos_emb[:, :length]

        causal = torch.triu(torch.ones(length, length, dtype=torch.bool, device=ids.device), diagonal=1)
        causal = causal.view(1, 1, length, length)
        for block in self.blocks:
            x = block(x, causal)
        hidden = self.norm_f(x)
        return self.head(hidden), hidden


@dataclass
class SegExtraction:
    """Outcome of locating the `[OBJ]...[SEG]` span in a token sequence."""

    outcome: str  # "ok" | "no-segmentation" | "ambiguous-segmentation"
    h_seg_seq: torch.Tensor | None = None   # (N_sub, d)
    h_seg_query: torch.Tensor | None = None  # (1, d)
    span: tuple[int, int] | None = None      # inclusive token index range

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"


def extract_seg_states(hidden: torch.Tensor, ids, start: int = 0) -> SegExtraction:
    """Pull the hidden states of the single `[OBJ]..[SEG]` span.

    Zero `[SEG]` tokens is the declared "no-segmentation" outcome; anything
    other than exactly one well-ordered span is "ambiguous-segmentation".
    Scanning starts at `start` so generated tokens can be isolated from
    history that already contains spans.
    """
    if hidden.ndim == 3:
        if hidden.shape[0] != 1:
            raise ValueError("span extraction works on a single sequence")
        hidden = hidden[0]
    if isinstance(ids, torch.Tensor):
        ids = ids.flatten().tolist()
    id_list = [int(i) for i in ids]
    region = id_list[start:]
    obj_positions = [start + i for i, t in enumerate(region) if t == OBJ]
    seg_positions = [start + i for i, t in enumerate(region) if t == SEG]
    if not seg_positions:
        return SegExtraction(outcome="no-segmentation")
    if len(obj_positions) != 1 or len(seg_positions) != 1 or obj_positions[0] >= seg_positions[0]:
        return SegExtraction(outcome="ambiguous-segmentation")
    i, j = obj_positions[0], seg_positions[0]
    return SegExtraction(
        outcome="ok",
        h_seg_seq=hidden[i : j + 1],
        h_seg_query=hidden[j : j + 1],
        span=(i, j),
    )


@torch.no_grad()
def greedy_decode(
    lm: ReasoningLm,
    ids: list[int],
    prefix: torch.Tensor | None,
    max_new_tokens: int = 64,
    temperature: float = 0.0,
    generator: torch.Generator | None = None,
) -> list[int]:
    """Decode until <eos> or the budget/context runs out; returns new ids only."""
    lm.eval()
    out: list[int] = []
    seq = list(ids)
    for _ in range(max_new_tokens):
        if len(seq) >= lm.cfg.context:
            break
        logits, _ = lm(torch.tensor([seq], dtype=torch.long), prefix)
        step = logits[0, -1]
        if temperature > 0:
            probs = torch.softmax(step / temperature, dim=-1)
            nxt = int(torch.multinomial(probs, 1, generator=generator))
        else:
            nxt = int(step.argmax())
        out.append(nxt)
        seq.append(nxt)
        if nxt == EOS:
            break
    return out
