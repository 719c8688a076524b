"""Response quality metrics: BLEU-4, ROUGE-L, Dist-n, and a METEOR variant.

The METEOR variant matches unigrams exactly and then by a light suffix
stemmer; no synonym lexicon is involved, hence the `meteor_v` name in
reports.
"""

from __future__ import annotations

import math
from collections import Counter

from ..model.tokenizer import split_words


def _tokens(text: str) -> list[str]:
    return [t.lower() for t in split_words(text)]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(pred: str, refs: list[str]) -> float:
    """Corpus BLEU-4 restricted to one sentence: clipped precisions, no
    smoothing (any empty n-gram order zeroes the score), brevity penalty."""
    pred_tokens = _tokens(pred)
    ref_token_lists = [_tokens(r) for r in refs if r.strip()]
    if not pred_tokens or not ref_token_lists:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        pred_ngrams = _ngrams(pred_tokens, n)
        total = sum(pred_ngrams.values())
        if total == 0:
            return 0.0
        max_ref = Counter()
        for ref in ref_token_lists:
            for gram, count in _ngrams(ref, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        clipped = sum(min(count, max_ref[gram]) for gram, count in pred_ngrams.items())
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total) / 4.0
    c = len(pred_tokens)
    r = min((len(ref) for ref in ref_token_lists), key=lambda L: (abs(L - c), L))
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum)


def _lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pred: str, refs: list[str]) -> float:
    """LCS F-measure (harmonic mean of LCS precision and recall), max over refs."""
    pred_tokens = _tokens(pred)
    if not pred_tokens:
        return 0.0
    best = 0.0
    for ref in refs:
        ref_tokens = _tokens(ref)
        if not ref_tokens:
            continue
        lcs = _lcs_length(pred_tokens, ref_tokens)
        if lcs == 0:
            continue
        p = lcs / len(pred_tokens)
        r = lcs / len(ref_tokens)
        best = max(best, 2 * p * r / (p + r))
    return best


def dist_n(pred: str, n: int) -> float:
    """Distinct n-grams over total n-grams of the prediction."""
    tokens = _tokens(pred)
    total = len(tokens) - n + 1
    if total <= 0:
        return 0.0
    grams = [tuple(tokens[i : i + n]) for i in range(total)]
    return len(set(grams)) / total


_STEM_SUFFIXES = ("ing", "edly", "ed", "ies", "es", "ly", "s")


def light_stem(word: str) -> str:
    for suffix in _STEM_SUFFIXES:
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            return word[: len(word) - len(suffix)]
    return word


def _align(pred_tokens: list[str], ref_tokens: list[str]) -> list[tuple[int, int]]:
    """Greedy left-to-right matching: exact pass, then stemmed pass."""
    matches: list[tuple[int, int]] = []
    used = [False] * len(ref_tokens)
    unmatched = []
    for i, tok in enumerate(pred_tokens):
        for j, ref in enumerate(ref_tokens):
            if not used[j] and tok == ref:
                used[j] = True
                matches.append((i, j))
                break
        else:
            unmatched.append(i)
    for i in unmatched:
        stem = light_stem(pred_tokens[i])
        for j, ref in enumerate(ref_tokens):
            if not used[j] and stem == light_stem(ref):
                used[j] = True
                matches.append((i, j))
                break
    return sorted(matches)


def _chunks(matches: list[tuple[int, int]]) -> int:
    count = 0
    prev = None
    for i, j in matches:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            count += 1
        prev = (i, j)
    return count


def meteor_v(pred: str, refs: list[str]) -> float:
    """Recall-weighted harmonic unigram F with a fragmentation penalty."""
    pred_tokens = _tokens(pred)
    if not pred_tokens:
        return 0.0
    best = 0.0
    for ref in refs:
        ref_tokens = _tokens(ref)
        if not ref_tokens:
            continue
        matches = _align(pred_tokens, ref_tokens)
        m = len(matches)
        if m == 0:
            continue
        p = m / len(pred_tokens)
        r = m / len(ref_tokens)
        f_mean = 10 * p * r / (r + 9 * p)
        penalty = 0.5 * (_chunks(matches) / m) ** 3
        best = max(best, f_mean * (1.0 - penalty))
    return best


def text_metrics(pred: str, refs: list[str]) -> dict:
    """All response metrics for one prediction against its references."""
    if not pred.strip():
        return {"bleu4": 0.0, "rougeL": 0.0, "dist1": 0.0, "dist2": 0.0, "meteor_v": 0.0}
    return {
        "bleu4": bleu4(pred, refs),
        "rougeL": rouge_l(pred, refs),
        "dist1": dist_n(pred, 1),
        "dist2": dist_n(pred, 2),
        "meteor_v": meteor_v(pred, refs),
    }
