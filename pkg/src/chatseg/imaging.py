"""Image and mask value types, mask algebra, and the mask-granularity classifier.

Images are row-major float arrays normalized to [0, 1]; masks are row-major
boolean arrays. Both are immutable after construction so they can be shared
freely across threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionMismatchError, MaskDecodeError

MIN_IMAGE_SIDE = 8

# Granularity thresholds: area < (s*32)^2 is fine, area > (s*96)^2 is coarse.
FINE_FACTOR = 32
COARSE_FACTOR = 96
DEFAULT_SCALE_FACTOR = 1.6


@dataclass(frozen=True)
class ImageBuffer:
    """RGB raster with intensities in [0, 1], shape (height, width, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"image must have shape (H, W, 3), got {arr.shape}")
        h, w = arr.shape[:2]
        if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
            raise ValueError(f"image must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, got {w}x{h}")
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite intensities")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    @classmethod
    def from_uint8(cls, arr: np.ndarray) -> "ImageBuffer":
        return cls(np.asarray(arr, dtype=np.float32) / 255.0)

    def to_uint8(self) -> np.ndarray:
        return np.round(self.data * 255.0).astype(np.uint8)

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.to_uint8(), mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png(cls, blob: bytes) -> "ImageBuffer":
        try:
            img = Image.open(io.BytesIO(blob))
            img.load()
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise MaskDecodeError(f"cannot decode image bytes: {exc}") from exc
        return cls.from_uint8(np.asarray(img.convert("RGB"), dtype=np.uint8))


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel boolean target mask, shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("mask bits must be boolean or 0/1")
            arr = arr.astype(np.bool_)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("mask must be non-empty in both dimensions")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @classmethod
    def zeros(cls, height: int, width: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=np.bool_))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool((self.bits == other.bits).all())

    def __hash__(self):
        return hash((self.bits.shape, self.bits.tobytes()))


class Granularity(str, Enum):
    FINE = "fine"
    MEDIUM = "medium"
    COARSE = "coarse"


@dataclass(frozen=True)
class GranularityLabel:
    value: Granularity
    area_px: int
    scale_factor_s: float = DEFAULT_SCALE_FACTOR

    def __post_init__(self):
        if self.scale_factor_s <= 0:
            raise ValueError("scale factor must be positive")
        if self.area_px < 0:
            raise ValueError("area must be non-negative")
        expected = _label_for(self.area_px, self.scale_factor_s)
        if expected is not self.value:
            raise ValueError(
                f"label {self.value} inconsistent with area {self.area_px} at s={self.scale_factor_s}"
            )


def _label_for(area_px: int, s: float) -> Granularity:
    if area_px < (s * FINE_FACTOR) ** 2:
        return Granularity.FINE
    if area_px > (s * COARSE_FACTOR) ** 2:
        return Granularity.COARSE
    return Granularity.MEDIUM


def classify_granularity(area_px: int, s: float = DEFAULT_SCALE_FACTOR) -> GranularityLabel:
    """Classify a mask area as fine/medium/coarse.

    Fine means area < (s*32)^2 px, coarse means area > (s*96)^2 px, and the
    closed interval between the two thresholds is medium.
    """
    if s <= 0:
        raise ValueError("scale factor must be positive")
    if area_px < 0:
        raise ValueError("area must be non-negative")
    return GranularityLabel(value=_label_for(area_px, s), area_px=int(area_px), scale_factor_s=float(s))


def mask_area(mask: BinaryMask) -> int:
    """Number of true pixels."""
    return int(mask.bits.sum())


def _check_same_shape(a: BinaryMask, b: BinaryMask):
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatchError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def mask_intersection_union(a: BinaryMask, b: BinaryMask) -> tuple[int, int]:
    _check_same_shape(a, b)
    inter = int(np.logical_and(a.bits, b.bits).sum())
    union = int(np.logical_or(a.bits, b.bits).sum())
    return inter, union


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; two empty masks agree perfectly (1.0)."""
    inter, union = mask_intersection_union(a, b)
    if union == 0:
        return 1.0
    return inter / union


def mask_to_png(mask: BinaryMask) -> bytes:
    """Serialize as 8-bit single-channel PNG, true -> 255, false -> 0."""
    arr = np.where(mask.bits, np.uint8(255), np.uint8(0))
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def png_to_mask(blob: bytes) -> BinaryMask:
    """Decode a {0, 255}-valued single-channel PNG back into a mask."""
    try:
        img = Image.open(io.BytesIO(blob))
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise MaskDecodeError(f"cannot decode mask bytes: {exc}") from exc
    if img.mode != "L":
        raise MaskDecodeError(f"mask PNG must be single-channel 8-bit, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.uint8)
    bad = ~np.isin(arr, (0, 255))
    if bad.any():
        values = sorted(int(v) for v in np.unique(arr[bad]))
        raise MaskDecodeError(f"mask PNG contains non-binary pixel values {values[:8]}")
    return BinaryMask(arr == 255)


def resize_mask_nearest(mask: BinaryMask, height: int, width: int) -> BinaryMask:
    """Nearest-neighbour resample, used when a mask must match a model grid."""
    if (mask.height, mask.width) == (height, width):
        return mask
    rows = (np.arange(height) + 0.5) * mask.height / height
    cols = (np.arange(width) + 0.5) * mask.width / width
    ri = np.clip(rows.astype(np.int64), 0, mask.height - 1)
    ci = np.clip(cols.astype(np.int64), 0, mask.width - 1)
    return BinaryMask(mask.bits[np.ix_(ri, ci)])
