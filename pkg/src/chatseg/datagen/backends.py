"""Generation backends: the protocol plus an HTTP chat-completions client.

The external backend mirrors the three-stage prompting used to build the
dataset (element listing, question formation, tree expansion) against any
chat-completions-style endpoint. Endpoint and credential come from the
environment so secrets never land in config files:

    CHATSEG_LLM_ENDPOINT   e.g. https://host/v1/chat/completions
    CHATSEG_LLM_API_KEY    bearer token (optional)
    CHATSEG_LLM_MODEL      model name (default "gpt-4o")
"""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
import requests

from ..errors import BackendError
from ..imaging import ImageBuffer
from .types import ReasoningNode, ReasoningQuestion, SceneElement

logger = logging.getLogger("chatseg.datagen")


@runtime_checkable
class GeneratorBackend(Protocol):
    """What the pipeline needs from a scene-understanding backend.

    `expand_reasoning` returns the root of a QA chain; by convention the
    first child of every node is the on-path continuation, any further
    children are explored-and-rejected branches.
    """

    name: str

    def list_elements(self, image: ImageBuffer, image_id: str) -> list[SceneElement]: ...

    def compose_question(self, image: ImageBuffer, target: SceneElement, rng: np.random.Generator) -> str: ...

    def expand_reasoning(
        self,
        question: ReasoningQuestion,
        target: SceneElement,
        elements: list[SceneElement],
        rng: np.random.Generator,
        max_depth: int,
    ) -> ReasoningNode: ...

    def refine_turns(self, steps: list[tuple[str, str]], elements: list[SceneElement]) -> list[tuple[str, str]]: ...


ELEMENTS_PROMPT = """List every clearly visible object in the attached image.
Return strict JSON: {"elements": [{"name": str, "attributes": {"color": str, "position": str}, "description": str}, ...]}
Name each object with a short noun phrase and give at least color and position attributes."""

QUESTION_PROMPT = """Write one complex question about the attached image whose answer is the object described below, without naming the object directly. The question should require reasoning over the scene.
Object: {description}
Return strict JSON: {{"question": str}}"""

TREE_PROMPT = """Decompose the question below into a chain of at most {max_depth} progressively finer question/answer steps that end by identifying the object exactly. Earlier steps stay broad, later steps pin down specifics.
Question: {question}
Object: {description}
Return strict JSON: {{"steps": [{{"question": str, "answer": str}}, ...], "branches": [{{"after_step": int, "question": str, "answer": str}}, ...]}}
"branches" lists optional considered-and-rejected alternatives (at most two per step)."""

DIALOGUE_PROMPT = """Rewrite the answers in the QA steps below so each one reads naturally in a flowing conversation about the image, keeping every fact intact and keeping the question texts unchanged.
Steps: {steps}
Return strict JSON: {{"steps": [{{"question": str, "answer": str}}, ...]}} with the same number of steps."""


@dataclass
class LlmBackendConfig:
    endpoint: str = ""
    api_key: str = ""
    model: str = "gpt-4o"
    temperature: float = 0.2
    timeout_s: float = 60.0
    max_retries: int = 1
    backoff_s: float = 1.0
    max_in_flight: int = 4

    @classmethod
    def from_env(cls) -> "LlmBackendConfig":
        return cls(
            endpoint=os.environ.get("CHATSEG_LLM_ENDPOINT", ""),
            api_key=os.environ.get("CHATSEG_LLM_API_KEY", ""),
            model=os.environ.get("CHATSEG_LLM_MODEL", "gpt-4o"),
        )


class ChatCompletionsBackend:
    """JSON-over-HTTP backend for any chat-completions-style endpoint."""

    name = "llm"

    def __init__(self, config: LlmBackendConfig | None = None, session: requests.Session | None = None):
        self.config = config or LlmBackendConfig.from_env()
        if not self.config.endpoint:
            raise BackendError("no LLM endpoint configured (set CHATSEG_LLM_ENDPOINT)")
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(self.config.max_in_flight)

    # -- transport ---------------------------------------------------------

    def _post(self, messages: list[dict]) -> str:
        body = {"model": self.config.model, "messages": messages, "temperature": self.config.temperature}
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        logger.debug("llm request: %s", json.dumps({**body, "messages": "<%d messages>" % len(messages)}))
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                with self._gate:
                    resp = self._session.post(
                        self.config.endpoint, json=body, headers=headers, timeout=self.config.timeout_s
                    )
                resp.raise_for_status()
                content = resp.json()["choices"][0]["message"]["content"]
                logger.debug("llm response: %.200s", content)
                return content
            except Exception as exc:  # noqa: BLE001 - any transport/shape failure retries
                last_error = exc
                if attempt < self.config.max_retries:
                    time.sleep(self.config.backoff_s * (attempt + 1))
        raise BackendError(f"LLM endpoint failed after {self.config.max_retries + 1} attempts: {last_error}")

    def _ask_json(self, prompt: str, image: ImageBuffer | None = None) -> dict:
        content: list | str
        if image is not None:
            b64 = base64.b64encode(image.to_png()).decode("ascii")
            content = [
                {"type": "text", "text": prompt},
                {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}},
            ]
        else:
            content = prompt
        messages = [{"role": "user", "content": content}]
        raw = self._post(messages)
        parsed = _parse_json_block(raw)
        if parsed is None:
            logger.debug("malformed llm payload, retrying once")
            parsed = _parse_json_block(self._post(messages))
        if parsed is None:
            raise BackendError("LLM returned malformed JSON twice")
        return parsed

    # -- pipeline stages ----------------------------------------------------

    def list_elements(self, image: ImageBuffer, image_id: str) -> list[SceneElement]:
        payload = self._ask_json(ELEMENTS_PROMPT, image)
        raw = payload.get("elements")
        if not isinstance(raw, list):
            raise BackendError(f"element listing for {image_id} missing 'elements' array")
        elements = []
        for i, item in enumerate(raw):
            try:
                elements.append(
                    SceneElement(
                        id=f"e{i}",
                        name=str(item["name"]),
                        attributes={str(k): str(v) for k, v in dict(item.get("attributes", {})).items()} or {"position": "unknown"},
                        description=str(item.get("description", item["name"])),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise BackendError(f"malformed element entry {i} for {image_id}: {exc}") from exc
        return elements

    def compose_question(self, image: ImageBuffer, target: SceneElement, rng: np.random.Generator) -> str:
        payload = self._ask_json(QUESTION_PROMPT.format(description=target.description), image)
        question = str(payload.get("question", "")).strip()
        if not question:
            raise BackendError(f"empty question for element {target.id}")
        return question

    def expand_reasoning(
        self,
        question: ReasoningQuestion,
        target: SceneElement,
        elements: list[SceneElement],
        rng: np.random.Generator,
        max_depth: int,
    ) -> ReasoningNode:
        payload = self._ask_json(
            TREE_PROMPT.format(max_depth=max_depth, question=question.text, description=target.description)
        )
        steps = payload.get("steps")
        if not isinstance(steps, list) or not steps:
            raise BackendError(f"tree expansion for {target.id} missing steps")
        nodes = [ReasoningNode(question=str(s["question"]), answer=str(s["answer"])) for s in steps]
        for parent, child in zip(nodes, nodes[1:]):
            parent.children.append(child)
        for branch in payload.get("branches", []) or []:
            idx = int(branch.get("after_step", 0))
            if 0 <= idx < len(nodes) - 1:
                nodes[idx].children.append(
                    ReasoningNode(question=str(branch["question"]), answer=str(branch["answer"]))
                )
        return nodes[0]

    def refine_turns(self, steps: list[tuple[str, str]], elements: list[SceneElement]) -> list[tuple[str, str]]:
        listing = json.dumps([{"question": q, "answer": a} for q, a in steps], ensure_ascii=False)
        try:
            payload = self._ask_json(DIALOGUE_PROMPT.format(steps=listing))
            refined = [(str(s["question"]), str(s["answer"])) for s in payload["steps"]]
        except (BackendError, KeyError, TypeError):
            logger.warning("dialogue refinement failed, keeping raw steps")
            return steps
        if len(refined) != len(steps) or any(not q.strip() or not a.strip() for q, a in refined):
            logger.warning("dialogue refinement changed step count, keeping raw steps")
            return steps
        return refined


def _parse_json_block(text: str) -> dict | None:
    text = (text or "").strip()
    try:
        value = json.loads(text)
        return value if isinstance(value, dict) else None
    except json.JSONDecodeError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        try:
            value = json.loads(text[start : end + 1])
            return value if isinstance(value, dict) else None
        except json.JSONDecodeError:
            return None
    return None
