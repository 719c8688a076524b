from .judge import (
    JUDGE_METRICS,
    HttpJudge,
    JudgeClient,
    JudgeScores,
    StubJudge,
    WinRateReport,
    judge_reasoning,
    parse_score,
    win_rate,
)
from .report import evaluate_predictions, read_predictions, write_report
from .segmentation import ciou, mean_iou, pixel_prf
from .text import bleu4, dist_n, light_stem, meteor_v, rouge_l, text_metrics

__all__ = [
    "JUDGE_METRICS",
    "HttpJudge",
    "JudgeClient",
    "JudgeScores",
    "StubJudge",
    "WinRateReport",
    "judge_reasoning",
    "parse_score",
    "win_rate",
    "evaluate_predictions",
    "read_predictions",
    "write_report",
    "ciou",
    "mean_iou",
    "pixel_prf",
    "bleu4",
    "dist_n",
    "light_stem",
    "meteor_v",
    "rouge_l",
    "text_metrics",
]
