"""Command-line entry point wiring all modules.

Subcommands: gen-data, train, eval, infer, serve, chat.
Exit codes: 0 success, 1 validation error, 2 runtime failure. Errors go to
stderr as one JSON line. Flags override values from an optional YAML config
file; `--print-config` shows the effective configuration and exits.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .datagen import GenerationConfig, SceneConfig, generate_dataset, load_dataset
from .errors import ChatsegError, ConfigError, PipelineError
from .eval import HttpJudge, StubJudge, evaluate_predictions, write_report
from .imaging import ImageBuffer, mask_to_png, resize_mask_nearest
from .model import ModelConfig, Tokenizer, build_model
from .training import (
    TrainConfig,
    build_stage_samples,
    generation_ciou,
    latest_checkpoint,
    load_checkpoint,
    teacher_forced_text_loss,
    train,
)
from .training.data import training_corpus

logger = logging.getLogger("chatseg.cli")

SCENE_PRESETS = {
    # granularity-threshold mixture (53/25/22 fine-heavy), canvas sized to fit
    "default": SceneConfig(),
    # fixed small canvas with relative areas, matched to the tiny model
    "train64": SceneConfig(
        image_size=64,
        min_canvas=64,
        area_mode="relative",
        relative_area=(0.08, 0.24),
        n_elements=(2, 4),
        depth_range=(2, 3),
        decoy_probability=0.2,
    ),
}


def _fail(kind: str, detail: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "detail": detail}) + "\n")
    return code


def _load_config_section(path: str | None, section: str) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    section_data = data.get(section, {})
    if not isinstance(section_data, dict):
        raise ConfigError(f"config section {section!r} must be a mapping")
    return section_data


def _effective(defaults: dict, file_values: dict, flag_values: dict) -> dict:
    merged = dict(defaults)
    merged.update({k: v for k, v in file_values.items() if v is not None})
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return merged


def _echo_config(out_dir: Path, config: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.effective.yaml").write_text(
        yaml.safe_dump(config, sort_keys=True), encoding="utf-8"
    )


def _maybe_print_config(args, config: dict) -> bool:
    if getattr(args, "print_config", False):
        sys.stdout.write(yaml.safe_dump(config, sort_keys=True))
        return True
    return False


# -- gen-data ------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    file_values = _load_config_section(args.config, "gen_data")
    defaults = {
        "backend": "synthetic",
        "num_images": 10,
        "seed": 0,
        "out": "dataset",
        "k_min": 2,
        "k_max": 4,
        "max_depth": 7,
        "scene_preset": "default",
        "images_dir": None,
    }
    flags = {
        "backend": args.backend,
        "num_images": args.num_images,
        "seed": args.seed,
        "out": args.out,
        "k_min": args.k_min,
        "k_max": args.k_max,
        "max_depth": args.max_depth,
        "scene_preset": args.scene_preset,
        "images_dir": args.images_dir,
    }
    config = _effective(defaults, file_values, flags)
    if _maybe_print_config(args, config):
        return 0
    if config["scene_preset"] not in SCENE_PRESETS:
        raise ConfigError(f"unknown scene preset {config['scene_preset']!r}")
    gen = GenerationConfig(
        backend=config["backend"],
        num_images=int(config["num_images"]),
        seed=int(config["seed"]),
        out_dir=config["out"],
        k_min=int(config["k_min"]),
        k_max=int(config["k_max"]),
        max_depth=int(config["max_depth"]),
        scene=SCENE_PRESETS[config["scene_preset"]],
        images_dir=config["images_dir"],
    )
    _echo_config(Path(config["out"]), config)
    manifest = generate_dataset(gen)
    summary = manifest.summary
    sys.stdout.write(
        f"wrote {summary['num_samples']} samples from {summary['num_images']} images "
        f"to {config['out']} (fine fraction {summary['fine_fraction']:.2f})\n"
    )
    return 0


# -- train ----------------------------------------------------------------------


def cmd_train(args) -> int:
    file_values = _load_config_section(args.config, "train")
    defaults = {
        "data": None,
        "stage": 1,
        "out": "runs/train",
        "steps": None,
        "batch_size": None,
        "lr": None,
        "grad_accum": None,
        "warmup_steps": None,
        "seed": 0,
        "unfreeze_all": False,
        "init_from": None,
        "model_preset": "default",
        "probe": False,
    }
    flags = {
        "data": args.data,
        "stage": args.stage,
        "out": args.out,
        "steps": args.steps,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "grad_accum": args.grad_accum,
        "warmup_steps": args.warmup_steps,
        "seed": args.seed,
        "unfreeze_all": args.unfreeze_all or None,
        "init_from": args.init_from,
        "model_preset": args.model_preset,
        "probe": args.probe or None,
    }
    config = _effective(defaults, file_values, flags)
    if _maybe_print_config(args, config):
        return 0
    if not config["data"]:
        raise ConfigError("train needs --data pointing at a manifest.jsonl")
    manifest_path = Path(config["data"])
    if not manifest_path.exists():
        raise ConfigError(f"manifest not found: {manifest_path}")
    stage = int(config["stage"])
    if stage == 2 and not config["init_from"]:
        raise ConfigError("stage 2 requires a stage-1 checkpoint via --init-from")

    samples = load_dataset(manifest_path, split=None)
    if config["init_from"]:
        ckpt = Path(config["init_from"])
        if ckpt.name.startswith("step_") is False:
            found = latest_checkpoint(ckpt)
            if found is None:
                raise ConfigError(f"no checkpoint found under {ckpt}")
            ckpt = found
        model, _ = load_checkpoint(ckpt)
    else:
        tokenizer = Tokenizer.from_corpus(training_corpus(samples))
        model = build_model(ModelConfig.preset(config["model_preset"]), tokenizer, seed=int(config["seed"]))

    stage_samples = build_stage_samples(stage, samples, model)
    train_cfg = TrainConfig(
        stage=stage,
        lr=config["lr"],
        steps=int(config["steps"]) if config["steps"] is not None else None,
        batch_size=int(config["batch_size"]) if config["batch_size"] is not None else None,
        grad_accum=int(config["grad_accum"]) if config["grad_accum"] is not None else 10,
        warmup_steps=int(config["warmup_steps"]) if config["warmup_steps"] is not None else 100,
        seed=int(config["seed"]),
        unfreeze_all=bool(config["unfreeze_all"]),
    )
    out_dir = Path(config["out"])
    _echo_config(out_dir, config)
    result = train(train_cfg, stage_samples, model, out_dir=out_dir)
    sys.stdout.write(f"stage {stage} finished at step {result.final_step}; checkpoint {result.checkpoint_dir}\n")
    if config["probe"]:
        probe = {
            "text_loss": teacher_forced_text_loss(model, samples),
            **{k: v for k, v in generation_ciou(model, samples).items() if k != "responses"},
        }
        (out_dir / "probe.json").write_text(json.dumps(probe, indent=2), encoding="utf-8")
        sys.stdout.write(f"train-set probe: {json.dumps(probe)}\n")
    return 0


# -- eval -----------------------------------------------------------------------


def cmd_eval(args) -> int:
    file_values = _load_config_section(args.config, "eval")
    defaults = {
        "pred": None,
        "data": None,
        "metrics": "seg,text",
        "out": "report.json",
        "judge": "stub",
        "judge_stub_score": 4,
    }
    flags = {
        "pred": args.pred,
        "data": args.data,
        "metrics": args.metrics,
        "out": args.out,
        "judge": args.judge,
        "judge_stub_score": args.judge_stub_score,
    }
    config = _effective(defaults, file_values, flags)
    if _maybe_print_config(args, config):
        return 0
    if not config["pred"] or not config["data"]:
        raise ConfigError("eval needs --pred and --data")
    for key in ("pred", "data"):
        if not Path(config[key]).exists():
            raise ConfigError(f"{key} file not found: {config[key]}")
    metrics = {m.strip() for m in str(config["metrics"]).split(",") if m.strip()}
    unknown = metrics - {"seg", "text", "judge"}
    if unknown:
        raise ConfigError(f"unknown metrics: {', '.join(sorted(unknown))}")
    judge = None
    if "judge" in metrics:
        judge = HttpJudge() if config["judge"] == "http" else StubJudge(config["judge_stub_score"])
    report = evaluate_predictions(config["pred"], config["data"], metrics=metrics, judge=judge)
    write_report(report, config["out"])
    sys.stdout.write(f"report written to {config['out']}\n")
    return 0


# -- inference helpers ------------------------------------------------------------


def _load_model_for_inference(ckpt_arg: str):
    ckpt = Path(ckpt_arg)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    if not (ckpt / "params.bin").exists():
        found = latest_checkpoint(ckpt)
        if found is None:
            raise ConfigError(f"no checkpoint found under {ckpt}")
        ckpt = found
    model, snapshot = load_checkpoint(ckpt)
    return model, ckpt, snapshot


def _image_tensor(model, image_path: str):
    from .model.vision import image_to_tensor

    blob = Path(image_path).read_bytes()
    image = ImageBuffer.from_png(blob)
    return image, image_to_tensor(image, size=model.config.encoder.high_res)


def cmd_infer(args) -> int:
    from .datagen.types import Turn

    model, ckpt, _ = _load_model_for_inference(args.ckpt)
    if not Path(args.image).exists():
        raise ConfigError(f"image not found: {args.image}")
    if not Path(args.dialogue).exists():
        raise ConfigError(f"dialogue file not found: {args.dialogue}")
    turns_raw = json.loads(Path(args.dialogue).read_text(encoding="utf-8"))
    history = [Turn(**t) for t in turns_raw]
    image, tensor = _image_tensor(model, args.image)
    result = model.generate_reply(tensor, history)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "checkpoint": str(ckpt),
        "assistant_text": result.text,
        "outcome": result.extraction.outcome,
        "seg_triggered": result.mask is not None,
        "target_class": result.target_class,
    }
    if result.mask is not None:
        sized = resize_mask_nearest(result.mask, image.height, image.width)
        (out_dir / "mask.png").write_bytes(mask_to_png(sized))
        payload["mask_path"] = "mask.png"
    (out_dir / "response.json").write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    sys.stdout.write(json.dumps(payload, ensure_ascii=False) + "\n")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionStore, create_app

    model, ckpt, _ = _load_model_for_inference(args.ckpt)
    store = SessionStore(path=args.store, ttl_s=args.ttl, max_sessions=args.max_sessions)
    app = create_app(model, store=store, ui_dir=args.ui_dir, checkpoint_name=str(ckpt))
    sys.stdout.write(f"serving checkpoint {ckpt} on {args.host}:{args.port}\n")
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_chat(args) -> int:
    from .datagen.types import Turn

    model, ckpt, _ = _load_model_for_inference(args.ckpt)
    image, tensor = _image_tensor(model, args.image)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    history: list[Turn] = []
    sys.stdout.write(f"chatting against {ckpt}; empty line or 'exit' quits\n")
    turn_no = 0
    while True:
        try:
            line = input("you> ").strip()
        except EOFError:
            break
        if not line or line == "exit":
            break
        turn_no += 1
        history.append(Turn("user", line))
        result = model.generate_reply(tensor, history)
        history.append(Turn("assistant", result.text))
        sys.stdout.write(f"assistant> {result.text}\n")
        if result.mask is not None:
            sized = resize_mask_nearest(result.mask, image.height, image.width)
            mask_path = out_dir / f"mask_turn{turn_no}.png"
            mask_path.write_bytes(mask_to_png(sized))
            sys.stdout.write(f"[mask written to {mask_path}]\n")
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chatseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a dialogue+mask dataset")
    p.add_argument("--backend", choices=["synthetic", "llm"])
    p.add_argument("--num-images", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--k-min", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--scene-preset", choices=sorted(SCENE_PRESETS))
    p.add_argument("--images-dir", help="source images for the llm backend")
    p.add_argument("--config")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train stage 1 or 2")
    p.add_argument("--data", help="manifest.jsonl of the training dataset")
    p.add_argument("--stage", type=int, choices=[1, 2])
    p.add_argument("--out")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--grad-accum", type=int)
    p.add_argument("--warmup-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--unfreeze-all", action="store_true")
    p.add_argument("--init-from", help="checkpoint dir (required for stage 2)")
    p.add_argument("--model-preset", choices=["default", "tiny"])
    p.add_argument("--probe", action="store_true", help="report train-set text loss and CIoU")
    p.add_argument("--config")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a predictions file against a manifest")
    p.add_argument("--pred")
    p.add_argument("--data")
    p.add_argument("--metrics", help="comma list from seg,text,judge")
    p.add_argument("--out")
    p.add_argument("--judge", choices=["stub", "http"])
    p.add_argument("--judge-stub-score", type=int)
    p.add_argument("--config")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="one-shot response+mask for an image and dialogue")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--dialogue", required=True, help="JSON list of {role, text}")
    p.add_argument("--out", default="infer_out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--store", default=":memory:")
    p.add_argument("--ttl", type=float, default=24 * 3600.0)
    p.add_argument("--max-sessions", type=int, default=256)
    p.add_argument("--ui-dir", help="static frontend build to mount at /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("chat", help="terminal REPL against a local checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", default="chat_out")
    p.set_defaults(func=cmd_chat)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s %(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except (PipelineError, ChatsegError, RuntimeError, OSError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
