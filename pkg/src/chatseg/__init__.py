"""chatseg: multi-turn chat-driven pixel segmentation at desk scale."""

__version__ = "0.1.0"

from .imaging import (
    BinaryMask,
    Granularity,
    GranularityLabel,
    ImageBuffer,
    classify_granularity,
    mask_area,
    mask_iou,
    mask_to_png,
    png_to_mask,
)

__all__ = [
    "BinaryMask",
    "Granularity",
    "GranularityLabel",
    "ImageBuffer",
    "classify_granularity",
    "mask_area",
    "mask_iou",
    "mask_to_png",
    "png_to_mask",
    "__version__",
]
