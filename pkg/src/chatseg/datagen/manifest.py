"""Loading datasets back from a manifest directory."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..imaging import BinaryMask, ImageBuffer, png_to_mask
from .types import Turn, validate_turns


@dataclass
class LoadedSample:
    sample_id: str
    image_id: str
    split: str
    image: ImageBuffer
    mask: BinaryMask
    turns: list[Turn]
    target_class: str
    granularity: str
    area_px: int

    @property
    def dialogue_turns(self) -> list[dict]:
        return [t.to_dict() for t in self.turns]


def read_manifest(manifest_path: str | Path) -> list[dict]:
    path = Path(manifest_path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def load_dataset(manifest_path: str | Path, split: str | None = None) -> list[LoadedSample]:
    """Materialize manifest records with their images and masks."""
    path = Path(manifest_path)
    root = path.parent
    samples = []
    image_cache: dict[str, ImageBuffer] = {}
    for rec in read_manifest(path):
        if split is not None and rec["split"] != split:
            continue
        image_rel = rec["image_path"]
        if image_rel not in image_cache:
            image_cache[image_rel] = ImageBuffer.from_png((root / image_rel).read_bytes())
        mask = png_to_mask((root / rec["mask_path"]).read_bytes())
        turns = [Turn(**t) for t in rec["turns"]]
        validate_turns(turns)  # dataset contract re-checked at load
        samples.append(
            LoadedSample(
                sample_id=rec["sample_id"],
                image_id=rec["image_id"],
                split=rec["split"],
                image=image_cache[image_rel],
                mask=mask,
                turns=turns,
                target_class=rec["target_class"],
                granularity=rec["granularity"],
                area_px=rec["area_px"],
            )
        )
    return samples
