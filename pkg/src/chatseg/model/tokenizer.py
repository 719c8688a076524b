"""Word-level tokenizer with fixed special tokens.

The corpus is small and synthetic, so a whitespace/punctuation split with an
<unk> fallback beats a subword scheme here. Specials occupy the first ids and
are serialized first in vocab.txt (one token per line).
"""

from __future__ import annotations

import re
from pathlib import Path

PAD, UNK, EOS, USER, ASSISTANT, IMG, OBJ, SEG = range(8)

SPECIAL_TOKENS = ["<pad>", "<unk>", "<eos>", "<user>", "<assistant>", "[IMG]", "[OBJ]", "[SEG]"]

_TOKEN_RE = re.compile(
    r"\[IMG\]|\[OBJ\]|\[SEG\]|<pad>|<unk>|<eos>|<user>|<assistant>|[A-Za-z0-9]+(?:['-][A-Za-z0-9]+)*|[^\sA-Za-z0-9]"
)


def split_words(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


class Tokenizer:
    def __init__(self, words: list[str]):
        self.tokens = SPECIAL_TOKENS + [w for w in words if w not in SPECIAL_TOKENS]
        self.token_to_id = {t: i for i, t in enumerate(self.tokens)}
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    # -- construction --------------------------------------------------------

    @classmethod
    def from_corpus(cls, texts) -> "Tokenizer":
        counts: dict[str, int] = {}
        for text in texts:
            for tok in split_words(text):
                if tok not in SPECIAL_TOKENS:
                    counts[tok] = counts.get(tok, 0) + 1
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        return cls(ordered)

    @classmethod
    def load(cls, path: str | Path) -> "Tokenizer":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if lines[: len(SPECIAL_TOKENS)] != SPECIAL_TOKENS:
            raise ValueError("vocab file does not start with the special tokens")
        return cls(lines[len(SPECIAL_TOKENS) :])

    def save(self, path: str | Path):
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    # -- encode / decode ------------------------------------------------------

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self.token_to_id.get(tok, UNK) for tok in split_words(text)]

    def decode(self, ids, skip_special: bool = False) -> str:
        parts = []
        for i in ids:
            tok = self.tokens[int(i)]
            if skip_special and int(i) in (PAD, EOS, USER, ASSISTANT, IMG):
                continue
            parts.append(tok)
        return " ".join(parts)

    def is_special(self, token_id: int) -> bool:
        return token_id < len(SPECIAL_TOKENS)
