"""Two-stage trainer: AdamW, linear warmup then linear decay, spec freezing."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigError
from ..model.full import SegChatModel
from ..model.lm import extract_seg_states
from .data import TrainSample, collate
from .losses import LossWeights, bce_loss, dice_loss, text_loss, total_loss

logger = logging.getLogger("chatseg.training")

STAGE_DEFAULTS = {
    1: {"lr": 3e-4, "batch_size": 16, "steps": 2000},
    2: {"lr": 1e-5, "batch_size": 32, "steps": 800},
}


@dataclass
class TrainConfig:
    stage: int = 1
    lr: float | None = None            # stage default: 3e-4 / 1e-5
    beta1: float = 0.9
    beta2: float = 0.95
    warmup_steps: int = 100
    weight_decay: float = 0.0
    grad_accum: int = 10
    batch_size: int | None = None      # stage default: 16 / 32
    steps: int | None = None           # desk defaults 2000 / 800 (full scale: 50k / 20k)
    seed: int = 0
    unfreeze_all: bool = False
    loss_weights: LossWeights = field(default_factory=LossWeights)
    log_every: int = 10
    checkpoint_every: int | None = None

    def resolved(self) -> "TrainConfig":
        if self.stage not in STAGE_DEFAULTS:
            raise ConfigError(f"stage must be 1 or 2, got {self.stage}")
        defaults = STAGE_DEFAULTS[self.stage]
        cfg = TrainConfig(**{**self.__dict__})
        cfg.lr = self.lr if self.lr is not None else defaults["lr"]
        cfg.batch_size = self.batch_size if self.batch_size is not None else defaults["batch_size"]
        cfg.steps = self.steps if self.steps is not None else defaults["steps"]
        if cfg.lr <= 0:
            raise ConfigError("learning rate must be positive")
        return cfg


def lr_at(step: int, peak: float, warmup: int, total: int) -> float:
    """Linear warmup to `peak` over `warmup` steps, then linear decay to 0."""
    if step <= 0:
        return 0.0
    if step < warmup:
        return peak * step / warmup
    if total <= warmup:
        return peak
    return peak * max(0.0, (total - step) / (total - warmup))


@dataclass
class TrainResult:
    log: list[dict]
    checkpoint_dir: Path | None
    final_step: int


def _batch_losses(model: SegChatModel, batch: list[TrainSample], weights: LossWeights):
    images, ids, loss_mask = collate(batch)
    logits, hidden = model(images, ids)

    # next-token prediction: position t predicts token t+1
    t_loss = text_loss(logits[:, :-1], ids[:, 1:], loss_mask[:, 1:])

    seg_rows, prompts = [], []
    for row, sample in enumerate(batch):
        if sample.mask is None:
            continue
        extraction = extract_seg_states(hidden[row], sample.ids)
        if not extraction.ok:
            logger.warning("sample %s has no clean [OBJ]..[SEG] span; skipping mask loss", sample.sample_id)
            continue
        prompts.append(model.aligner(extraction.h_seg_seq.unsqueeze(0), extraction.h_seg_query.unsqueeze(0)))
        seg_rows.append(row)

    if seg_rows:
        pix = model.pixel_encoder(images[seg_rows])
        mask_logits = model.mask_decoder(pix, torch.cat(prompts, dim=0))
        targets = torch.stack([batch[r].mask for r in seg_rows])
        b_loss = bce_loss(mask_logits, targets)
        d_loss = dice_loss(mask_logits, targets)
    else:
        b_loss = torch.zeros((), dtype=t_loss.dtype)
        d_loss = torch.zeros((), dtype=t_loss.dtype)

    parts = {"text": t_loss, "bce": b_loss, "dice": d_loss}
    return total_loss(parts, weights), parts


def train(
    config: TrainConfig,
    dataset: list[TrainSample],
    model: SegChatModel,
    out_dir: str | Path | None = None,
) -> TrainResult:
    """Run one stage. Returns the loss log and the final checkpoint path."""
    from .checkpoint import save_checkpoint

    cfg = config.resolved()
    if not dataset:
        raise ConfigError("empty training dataset")

    torch.manual_seed(cfg.seed)
    model.train()
    trainable, frozen = model.apply_freezing(cfg.unfreeze_all)
    logger.info("stage %d: %d trainable / %d frozen tensors", cfg.stage, len(trainable), len(frozen))

    params = [p for p in model.parameters() if p.requires_grad]
    if not params:
        raise ConfigError("freezing left no trainable parameters")
    optimizer = torch.optim.AdamW(
        params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), weight_decay=cfg.weight_decay
    )

    order_rng = np.random.default_rng([cfg.seed, cfg.stage])
    order: list[int] = []

    def next_batch(size: int) -> list[TrainSample]:
        nonlocal order
        while len(order) < size:
            order.extend(order_rng.permutation(len(dataset)).tolist())
        take, order = order[:size], order[size:]
        return [dataset[i] for i in take]

    log_path = Path(out_dir) / "train_log.jsonl" if out_dir else None
    if log_path:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_fh = open(log_path, "a", encoding="utf-8")
    log: list[dict] = []
    ckpt_dir = None

    for step in range(1, cfg.steps + 1):
        lr = lr_at(step, cfg.lr, cfg.warmup_steps, cfg.steps)
        for group in optimizer.param_groups:
            group["lr"] = lr
        optimizer.zero_grad()
        step_parts = {"text": 0.0, "bce": 0.0, "dice": 0.0, "total": 0.0}
        aborted = False
        for _ in range(cfg.grad_accum):
            batch = next_batch(cfg.batch_size)
            try:
                loss, parts = _batch_losses(model, batch, cfg.loss_weights)
            except ValueError as exc:
                logger.error("step %d aborted: %s", step, exc)
                aborted = True
                break
            (loss / cfg.grad_accum).backward()
            for name in ("text", "bce", "dice"):
                step_parts[name] += float(parts[name].detach()) / cfg.grad_accum
            step_parts["total"] += float(loss.detach()) / cfg.grad_accum
        if aborted:
            optimizer.zero_grad()
            continue
        optimizer.step()

        record = {
            "step": step,
            "L_t": round(step_parts["text"], 6),
            "bce": round(step_parts["bce"], 6),
            "dice": round(step_parts["dice"], 6),
            "total": round(step_parts["total"], 6),
            "lr": lr,
        }
        log.append(record)
        if log_path and (step % cfg.log_every == 0 or step == cfg.steps):
            log_fh.write(json.dumps(record) + "\n")
            log_fh.flush()
        if out_dir and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            ckpt_dir = save_checkpoint(model, step, out_dir, extra={"train_config": _config_dict(cfg)})

    if out_dir:
        ckpt_dir = save_checkpoint(model, cfg.steps, out_dir, extra={"train_config": _config_dict(cfg)})
        log_fh.close()
    model.eval()
    return TrainResult(log=log, checkpoint_dir=ckpt_dir, final_step=cfg.steps)


def _config_dict(cfg: TrainConfig) -> dict:
    data = dict(cfg.__dict__)
    data["loss_weights"] = cfg.loss_weights.__dict__
    return data


def parameter_snapshot(model: SegChatModel) -> dict[str, torch.Tensor]:
    return {name: p.detach().clone() for name, p in model.named_parameters()}


def parameter_delta(before: dict[str, torch.Tensor], after: dict[str, torch.Tensor]) -> dict[str, float]:
    return {name: float((after[name] - before[name]).abs().max()) for name in before}
