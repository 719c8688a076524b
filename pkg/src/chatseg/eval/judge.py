"""LLM-as-judge reasoning-quality scoring plus the win-rate protocol.

Each of the four metrics (progressiveness, logical coherence, content
consistency, target relevance) is scored on a 0-5 scale by a judge client,
repeated five times, and averaged. A deterministic stub judge stands in when
no external endpoint is configured.
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass, field
from typing import Protocol

import requests

from ..datagen.backends import LlmBackendConfig
from ..errors import BackendError

logger = logging.getLogger("chatseg.eval")

REPEATS = 5
MIN_VALID_REPEATS = 3

JUDGE_METRICS = {
    "pr": (
        "Progressiveness",
        "whether each turn effectively sets up and guides the next one",
    ),
    "lc": (
        "Logical Coherence",
        "whether consecutive turns connect through smooth logical steps",
    ),
    "cc": (
        "Content Consistency",
        "whether the dialogue stays organized around its overall topic",
    ),
    "tr": (
        "Target Relevance",
        "whether the dialogue stays focused on the object to be segmented",
    ),
}

RUBRIC_TEMPLATE = """You are grading one dimension of a multi-turn dialogue about an image.

Dimension: {title} - {criterion}.

Scoring scale (integers 0-5):
- 0-1: the dialogue clearly fails this dimension (contradictions, abrupt or irrelevant turns).
- 2-3: partially satisfies it (some slips, loose or generic connections).
- 4-5: consistently satisfies it (clear, well-linked, on-target).

Dialogue:
{dialogue}

Candidate response to grade:
{response}

Reply with a single integer between 0 and 5 and nothing else."""


class JudgeClient(Protocol):
    def score(self, metric: str, prompt: str) -> str: ...


class StubJudge:
    """Deterministic scripted judge for offline runs and tests.

    `script` maps metric -> list of raw replies consumed in order (cycled);
    a plain number makes every reply that number.
    """

    def __init__(self, script: dict[str, list[str]] | float | int = 4):
        self.script = script
        self._cursor: dict[str, int] = {}

    def score(self, metric: str, prompt: str) -> str:
        if isinstance(self.script, (int, float)):
            return str(self.script)
        replies = self.script[metric]
        i = self._cursor.get(metric, 0)
        self._cursor[metric] = i + 1
        return replies[i % len(replies)]


class HttpJudge:
    """Judge backed by a chat-completions endpoint (same config style as the
    dataset backend)."""

    def __init__(self, config: LlmBackendConfig | None = None, session: requests.Session | None = None):
        self.config = config or LlmBackendConfig.from_env()
        if not self.config.endpoint:
            raise BackendError("no judge endpoint configured (set CHATSEG_LLM_ENDPOINT)")
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(self.config.max_in_flight)

    def score(self, metric: str, prompt: str) -> str:
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 1.0,  # repeats should sample, the mean removes noise
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        with self._gate:
            resp = self._session.post(self.config.endpoint, json=body, headers=headers, timeout=self.config.timeout_s)
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]


@dataclass
class JudgeScores:
    pr: float | None = None
    lc: float | None = None
    cc: float | None = None
    tr: float | None = None
    repeats: dict[str, list[int]] = field(default_factory=dict)
    unscored: bool = False

    @property
    def overall(self) -> float | None:
        values = [self.pr, self.lc, self.cc, self.tr]
        if any(v is None for v in values):
            return None
        return sum(values) / 4.0

    def to_dict(self) -> dict:
        return {
            "pr": self.pr,
            "lc": self.lc,
            "cc": self.cc,
            "tr": self.tr,
            "overall": self.overall,
            "repeats": self.repeats,
            "unscored": self.unscored,
        }


_SCORE_RE = re.compile(r"-?\d+")


def parse_score(raw: str) -> int | None:
    match = _SCORE_RE.search(raw or "")
    if not match:
        return None
    value = int(match.group())
    if 0 <= value <= 5:
        return value
    return None


def _dialogue_text(turns) -> str:
    lines = []
    for t in turns:
        role = t["role"] if isinstance(t, dict) else t.role
        text = t["text"] if isinstance(t, dict) else t.text
        lines.append(f"{role}: {text}")
    return "\n".join(lines)


def judge_reasoning(dialogue_turns, response: str, judge: JudgeClient, repeats: int = REPEATS) -> JudgeScores:
    """Score one response on all four metrics, `repeats` times each.

    A malformed judge reply is retried once, then that repeat is dropped;
    a metric with fewer than three valid repeats marks the sample unscored.
    """
    scores = JudgeScores()
    dialogue = _dialogue_text(dialogue_turns)
    for metric, (title, criterion) in JUDGE_METRICS.items():
        prompt = RUBRIC_TEMPLATE.format(title=title, criterion=criterion, dialogue=dialogue, response=response)
        valid: list[int] = []
        for _ in range(repeats):
            value = parse_score(judge.score(metric, prompt))
            if value is None:
                value = parse_score(judge.score(metric, prompt))  # one retry
            if value is None:
                logger.warning("judge repeat dropped for metric %s", metric)
                continue
            valid.append(value)
        scores.repeats[metric] = valid
        if len(valid) < MIN_VALID_REPEATS:
            scores.unscored = True
            setattr(scores, metric, None)
        else:
            setattr(scores, metric, sum(valid) / len(valid))
    return scores


@dataclass
class WinRateReport:
    wins: int
    losses: int
    ties: int

    @property
    def total(self) -> int:
        return self.wins + self.losses + self.ties

    @property
    def win_rate(self) -> float:
        return 100.0 * self.wins / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "wins": self.wins,
            "losses": self.losses,
            "ties": self.ties,
            "win_rate": self.win_rate,
        }


def win_rate(model_scores: list[float], human_scores: list[float]) -> WinRateReport:
    """Wins are strict score improvements over the human reference; ties stay
    in the denominator."""
    if len(model_scores) != len(human_scores):
        raise ValueError(f"misaligned score lists: {len(model_scores)} vs {len(human_scores)}")
    wins = sum(1 for m, h in zip(model_scores, human_scores) if m > h)
    ties = sum(1 for m, h in zip(model_scores, human_scores) if m == h)
    return WinRateReport(wins=wins, losses=len(model_scores) - wins - ties, ties=ties)
