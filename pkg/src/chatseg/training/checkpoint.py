"""Checkpoint container: step_{N}/params.bin + config.snapshot + vocab.txt."""

from __future__ import annotations

import json
from pathlib import Path

import torch

from ..model.config import ModelConfig
from ..model.full import SegChatModel
from ..model.tokenizer import Tokenizer


def save_checkpoint(model: SegChatModel, step: int, out_dir: str | Path, extra: dict | None = None) -> Path:
    ckpt_dir = Path(out_dir) / f"step_{step}"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    torch.save(
        {"model": model.state_dict(), "step": step, "torch_rng": torch.get_rng_state()},
        ckpt_dir / "params.bin",
    )
    snapshot = {"model_config": model.config.to_dict(), "step": step}
    if extra:
        snapshot.update(extra)
    (ckpt_dir / "config.snapshot").write_text(json.dumps(snapshot, indent=2), encoding="utf-8")
    model.tokenizer.save(ckpt_dir / "vocab.txt")
    return ckpt_dir


def load_checkpoint(ckpt_dir: str | Path, restore_rng: bool = False) -> tuple[SegChatModel, dict]:
    ckpt_dir = Path(ckpt_dir)
    if not (ckpt_dir / "params.bin").exists():
        raise FileNotFoundError(f"no params.bin under {ckpt_dir}")
    snapshot = json.loads((ckpt_dir / "config.snapshot").read_text(encoding="utf-8"))
    tokenizer = Tokenizer.load(ckpt_dir / "vocab.txt")
    model = SegChatModel(ModelConfig.from_dict(snapshot["model_config"]), tokenizer)
    payload = torch.load(ckpt_dir / "params.bin", map_location="cpu", weights_only=False)
    model.load_state_dict(payload["model"])
    if restore_rng:
        torch.set_rng_state(payload["torch_rng"])
    model.eval()
    return model, snapshot


def latest_checkpoint(root: str | Path) -> Path | None:
    root = Path(root)
    steps = []
    for child in root.glob("step_*"):
        try:
            steps.append((int(child.name.split("_", 1)[1]), child))
        except ValueError:
            continue
    if not steps:
        return None
    return max(steps)[1]
