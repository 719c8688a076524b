from .checkpoint import latest_checkpoint, load_checkpoint, save_checkpoint
from .data import STAGE1_RATIO, STAGE2_RATIO, TrainSample, build_stage_samples, collate
from .evaluate import generation_ciou, teacher_forced_text_loss
from .losses import DICE_EPS, LossWeights, bce_loss, dice_loss, text_loss, total_loss
from .trainer import TrainConfig, TrainResult, lr_at, parameter_delta, parameter_snapshot, train

__all__ = [
    "latest_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "STAGE1_RATIO",
    "STAGE2_RATIO",
    "TrainSample",
    "build_stage_samples",
    "collate",
    "generation_ciou",
    "teacher_forced_text_loss",
    "DICE_EPS",
    "LossWeights",
    "bce_loss",
    "dice_loss",
    "text_loss",
    "total_loss",
    "TrainConfig",
    "TrainResult",
    "lr_at",
    "parameter_delta",
    "parameter_snapshot",
    "train",
]
