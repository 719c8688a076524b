from .agreement import agreement_report, cohens_kappa
from .backends import ChatCompletionsBackend, GeneratorBackend, LlmBackendConfig
from .manifest import LoadedSample, load_dataset, read_manifest
from .pipeline import (
    DatasetManifest,
    GenerationConfig,
    assemble_dialogue,
    build_tree,
    extract_elements,
    form_question,
    generate_dataset,
    select_targets,
)
from .synthetic import SceneConfig, SyntheticBackend, SyntheticSceneGenerator
from .types import (
    SEG_INSTRUCTION,
    DialogueSample,
    ReasoningNode,
    ReasoningPath,
    ReasoningQuestion,
    ReasoningTree,
    SceneElement,
    Turn,
    seg_response_text,
    validate_turns,
)

__all__ = [
    "agreement_report",
    "cohens_kappa",
    "ChatCompletionsBackend",
    "GeneratorBackend",
    "LlmBackendConfig",
    "LoadedSample",
    "load_dataset",
    "read_manifest",
    "DatasetManifest",
    "GenerationConfig",
    "assemble_dialogue",
    "build_tree",
    "extract_elements",
    "form_question",
    "generate_dataset",
    "select_targets",
    "SceneConfig",
    "SyntheticBackend",
    "SyntheticSceneGenerator",
    "SEG_INSTRUCTION",
    "DialogueSample",
    "ReasoningNode",
    "ReasoningPath",
    "ReasoningQuestion",
    "ReasoningTree",
    "SceneElement",
    "Turn",
    "seg_response_text",
    "validate_turns",
]
