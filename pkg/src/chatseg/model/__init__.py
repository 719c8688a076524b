from .config import EncoderConfig, LmConfig, ModelConfig, SegConfig
from .full import GenerationResult, SegChatModel, build_model
from .lm import (
    ReasoningLm,
    RenderedPrompt,
    SegExtraction,
    VisionProjector,
    extract_seg_states,
    greedy_decode,
    render_prompt,
    render_turns,
)
from .seghead import InferenceError, MaskDecoder, PixelEncoder, SemanticAligner, decode_mask
from .tokenizer import SPECIAL_TOKENS, Tokenizer
from .vision import (
    CrossAttentionFuser,
    DualEncoder,
    FeatureGrid,
    HighResEncoder,
    LowResEncoder,
    downsample,
    encode_high,
    encode_low,
    image_to_tensor,
)

__all__ = [
    "EncoderConfig",
    "LmConfig",
    "ModelConfig",
    "SegConfig",
    "GenerationResult",
    "SegChatModel",
    "build_model",
    "ReasoningLm",
    "RenderedPrompt",
    "SegExtraction",
    "VisionProjector",
    "extract_seg_states",
    "greedy_decode",
    "render_prompt",
    "render_turns",
    "InferenceError",
    "MaskDecoder",
    "PixelEncoder",
    "SemanticAligner",
    "decode_mask",
    "SPECIAL_TOKENS",
    "Tokenizer",
    "CrossAttentionFuser",
    "DualEncoder",
    "FeatureGrid",
    "HighResEncoder",
    "LowResEncoder",
    "downsample",
    "encode_high",
    "encode_low",
    "image_to_tensor",
]
