"""Prediction-set evaluation: consumes a predictions JSONL and a dataset
manifest, emits a report with segmentation, response, and reasoning blocks."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..datagen.manifest import read_manifest
from ..imaging import png_to_mask
from .judge import JudgeClient, judge_reasoning
from .segmentation import ciou, mean_iou, pixel_prf
from .text import text_metrics

logger = logging.getLogger("chatseg.eval")


def read_predictions(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    for rec in records:
        if "sample_id" not in rec:
            raise ValueError("prediction record missing sample_id")
    return records


def _reference_response(record: dict) -> str:
    assistant = [t["text"] for t in record["turns"] if t["role"] == "assistant"]
    return assistant[-1] if assistant else ""


def evaluate_predictions(
    predictions_path: str | Path,
    manifest_path: str | Path,
    metrics: set[str] | None = None,
    judge: JudgeClient | None = None,
    bert_scorer=None,
) -> dict:
    """Score predictions against the manifest.

    `metrics` selects blocks from {"seg", "text", "judge"}; BERTScore stays a
    registered slot that reports "unavailable" unless a scorer is plugged in.
    """
    metrics = metrics or {"seg", "text"}
    pred_dir = Path(predictions_path).parent
    manifest_dir = Path(manifest_path).parent
    by_id = {rec["sample_id"]: rec for rec in read_manifest(manifest_path)}
    predictions = read_predictions(predictions_path)

    rows = []
    pred_masks, gt_masks = [], []
    prf_rows = []
    text_rows = []
    judge_rows = []
    missing = 0

    for pred in predictions:
        sample_id = pred["sample_id"]
        record = by_id.get(sample_id)
        if record is None:
            missing += 1
            logger.warning("prediction for unknown sample %s skipped", sample_id)
            continue
        row: dict = {"sample_id": sample_id}

        if "seg" in metrics:
            if pred.get("mask_path"):
                pred_mask = png_to_mask((pred_dir / pred["mask_path"]).read_bytes())
                gt_mask = png_to_mask((manifest_dir / record["mask_path"]).read_bytes())
                if pred_mask.bits.shape != gt_mask.bits.shape:
                    raise ValueError(f"mask shape mismatch for {sample_id}")
                pred_masks.append(pred_mask)
                gt_masks.append(gt_mask)
                prf = pixel_prf(pred_mask, gt_mask)
                prf_rows.append(prf)
                row["seg"] = prf
            else:
                row["seg"] = None

        if "text" in metrics:
            refs = [_reference_response(record)]
            scores = text_metrics(pred.get("response_text", ""), refs)
            text_rows.append(scores)
            row["text"] = scores

        if "judge" in metrics and judge is not None:
            scores = judge_reasoning(record["turns"][:-1], pred.get("response_text", ""), judge)
            judge_rows.append(scores)
            row["judge"] = scores.to_dict()

        rows.append(row)

    report: dict = {"num_predictions": len(predictions), "unmatched_predictions": missing, "samples": rows}

    if "seg" in metrics:
        if pred_masks:
            report["segmentation"] = {
                "ciou": ciou(pred_masks, gt_masks),
                "mean_iou": mean_iou(pred_masks, gt_masks),
                "precision": float(np.mean([r["precision"] for r in prf_rows])),
                "recall": float(np.mean([r["recall"] for r in prf_rows])),
                "f1": float(np.mean([r["f1"] for r in prf_rows])),
                "num_masks": len(pred_masks),
            }
        else:
            report["segmentation"] = {"num_masks": 0}

    if "text" in metrics and text_rows:
        report["response"] = {
            key: float(np.mean([r[key] for r in text_rows]))
            for key in ("bleu4", "rougeL", "dist1", "dist2", "meteor_v")
        }
        if bert_scorer is not None:
            report["response"]["bert_score"] = float(
                np.mean([bert_scorer(r["text"], _reference_response(by_id[r["sample_id"]])) for r in rows])
            )
        else:
            report["response"]["bert_score"] = "unavailable (no embedding scorer configured)"

    if "judge" in metrics and judge_rows:
        scored = [s for s in judge_rows if not s.unscored]
        report["reasoning"] = {
            "scored": len(scored),
            "unscored": len(judge_rows) - len(scored),
        }
        for metric in ("pr", "lc", "cc", "tr"):
            values = [getattr(s, metric) for s in scored if getattr(s, metric) is not None]
            report["reasoning"][metric] = float(np.mean(values)) if values else None

    return report


def write_report(report: dict, path: str | Path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(report, indent=2, ensure_ascii=False), encoding="utf-8")
