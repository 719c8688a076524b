"""Domain types for the dialogue-dataset generation pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..imaging import BinaryMask, GranularityLabel

# Final user instruction appended to every dialogue.
SEG_INSTRUCTION = "Please segment the core objects according to the above dialogue"

OBJ_TOKEN = "[OBJ]"
SEG_TOKEN = "[SEG]"

MAX_CHILDREN = 3
MAX_DEPTH = 7
MIN_DEPTH = 2
K_MIN = 2
K_MAX = 4


def is_segmentation_instruction(text: str) -> bool:
    return "segment" in text.lower()


def seg_response_text(target_class: str) -> str:
    """Assistant reply carrying the segmentation span for `target_class`."""
    return f"The region to segment is {OBJ_TOKEN} {target_class} {SEG_TOKEN}."


@dataclass
class SceneElement:
    """One visible object: a name plus attributes and an optional known mask."""

    id: str
    name: str
    attributes: dict[str, str]
    description: str
    gt_mask: BinaryMask | None = None

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("element name must be non-empty")
        if not self.id:
            raise ValueError("element id must be non-empty")


@dataclass
class ReasoningQuestion:
    """Implicit root question whose resolution requires a single target element."""

    target_id: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("question text must be non-empty")


@dataclass
class ReasoningNode:
    question: str
    answer: str
    children: list["ReasoningNode"] = field(default_factory=list)

    def __post_init__(self):
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("node question and answer must be non-empty")
        if len(self.children) > MAX_CHILDREN:
            raise ValueError(f"node has {len(self.children)} children, max is {MAX_CHILDREN}")

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class ReasoningPath:
    """Root-to-leaf QA chain ending at one segmentation target."""

    target_id: str
    steps: list[tuple[str, str]]
    depth: int = 0

    def __post_init__(self):
        if self.depth == 0:
            self.depth = len(self.steps)
        if self.depth != len(self.steps):
            raise ValueError("depth must equal the number of steps")
        if self.depth < MIN_DEPTH:
            raise ValueError(f"path depth {self.depth} below minimum {MIN_DEPTH}")
        for q, a in self.steps:
            if not q.strip() or not a.strip():
                raise ValueError("every step needs a non-empty question and answer")


@dataclass
class ReasoningTree:
    """Per-image bundle of reasoning paths, one per selected target."""

    image_id: str
    paths: list[ReasoningPath]
    K: int = 0
    roots: list[ReasoningNode] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.K == 0:
            self.K = len(self.paths)
        if self.K != len(self.paths):
            raise ValueError("K must equal the number of paths")
        if not (K_MIN <= self.K <= K_MAX):
            raise ValueError(f"K={self.K} outside [{K_MIN}, {K_MAX}]")


@dataclass
class Turn:
    role: str
    text: str

    def __post_init__(self):
        if self.role not in ("user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if not self.text.strip():
            raise ValueError("turn text must be non-empty")

    def to_dict(self) -> dict:
        return {"role": self.role, "text": self.text}


@dataclass
class DialogueSample:
    """One dataset record: a dialogue ending in a segmentation request/response."""

    sample_id: str
    image_path: str
    turns: list[Turn]
    target_class: str
    mask_path: str
    granularity: GranularityLabel
    source_tree: dict | None = None

    def __post_init__(self):
        validate_turns(self.turns)
        if not self.target_class.strip():
            raise ValueError("target class must be non-empty")


def validate_turns(turns: list[Turn]):
    """Enforce the dialogue contract shared by the dataset and the service.

    Roles strictly alternate starting with the user, the final user turn is a
    segmentation instruction, the final assistant turn carries exactly one
    [SEG] reference, and there are at least four utterances.
    """
    if len(turns) < 4:
        raise ValueError(f"dialogue needs at least 4 utterances, got {len(turns)}")
    for i, turn in enumerate(turns):
        expected = "user" if i % 2 == 0 else "assistant"
        if turn.role != expected:
            raise ValueError(f"turn {i} should be {expected}, got {turn.role}")
    if turns[-1].role != "assistant":
        raise ValueError("dialogue must end with an assistant turn")
    if not is_segmentation_instruction(turns[-2].text):
        raise ValueError("final user turn must be a segmentation instruction")
    n_seg = turns[-1].text.count(SEG_TOKEN)
    if n_seg != 1:
        raise ValueError(f"final assistant turn must contain exactly one {SEG_TOKEN}, got {n_seg}")
