import json
import shutil
from pathlib import Path

import pytest
import yaml

from chatseg.cli import main
from chatseg.datagen import read_manifest


def run_cli(*argv):
    return main(list(argv))


def gen_small_dataset(out_dir, seed=5, num_images=6):
    code = run_cli(
        "gen-data", "--backend", "synthetic", "--num-images", str(num_images),
        "--seed", str(seed), "--out", str(out_dir), "--scene-preset", "train64",
    )
    assert code == 0
    return Path(out_dir) / "manifest.jsonl"


class TestGenData:
    def test_writes_dataset_and_config_echo(self, tmp_path):
        manifest = gen_small_dataset(tmp_path / "ds")
        assert manifest.exists()
        assert (tmp_path / "ds" / "config.effective.yaml").exists()
        assert (tmp_path / "ds" / "summary.json").exists()

    def test_print_config_exits_zero(self, capsys):
        assert run_cli("gen-data", "--print-config") == 0
        parsed = yaml.safe_load(capsys.readouterr().out)
        assert parsed["backend"] == "synthetic"

    def test_seed_reproducibility(self, tmp_path):
        m1 = gen_small_dataset(tmp_path / "a", seed=9)
        m2 = gen_small_dataset(tmp_path / "b", seed=9)
        assert m1.read_bytes() == m2.read_bytes()

    def test_missing_config_file(self, tmp_path, capsys):
        code = run_cli("gen-data", "--config", str(tmp_path / "nope.yaml"))
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert "nope.yaml" in err["detail"]

    def test_config_file_values_used_flags_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(yaml.safe_dump({"gen_data": {"num_images": 3, "seed": 7}}), encoding="utf-8")
        assert run_cli("gen-data", "--config", str(cfg), "--seed", "8", "--print-config") == 0
        parsed = yaml.safe_load(capsys.readouterr().out)
        assert parsed["num_images"] == 3  # from file
        assert parsed["seed"] == 8        # flag wins

    def test_unknown_flag_is_usage_error(self):
        assert run_cli("gen-data", "--frobnicate") == 1


class TestTrainCli:
    def test_stage2_requires_checkpoint(self, tmp_path, capsys):
        manifest = gen_small_dataset(tmp_path / "ds")
        code = run_cli("train", "--data", str(manifest), "--stage", "2", "--out", str(tmp_path / "run"))
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert "stage-1 checkpoint" in err["detail"]

    def test_missing_manifest_named(self, tmp_path, capsys):
        code = run_cli("train", "--data", str(tmp_path / "missing.jsonl"), "--stage", "1")
        assert code == 1
        assert "missing.jsonl" in json.loads(capsys.readouterr().err)["detail"]

    def test_short_train_then_infer(self, tmp_path):
        manifest = gen_small_dataset(tmp_path / "ds", seed=3, num_images=8)
        run_dir = tmp_path / "run"
        code = run_cli(
            "train", "--data", str(manifest), "--stage", "1", "--out", str(run_dir),
            "--steps", "2", "--batch-size", "2", "--grad-accum", "1",
            "--model-preset", "tiny", "--seed", "1", "--unfreeze-all",
        )
        assert code == 0
        ckpt = run_dir / "step_2"
        assert (ckpt / "params.bin").exists()
        assert (run_dir / "train_log.jsonl").exists()

        records = read_manifest(manifest)
        image_path = tmp_path / "ds" / records[0]["image_path"]
        dialogue = tmp_path / "dialogue.json"
        dialogue.write_text(json.dumps(records[0]["turns"][:-1]), encoding="utf-8")
        out_dir = tmp_path / "infer"
        code = run_cli("infer", "--ckpt", str(run_dir), "--image", str(image_path),
                       "--dialogue", str(dialogue), "--out", str(out_dir))
        assert code == 0
        payload = json.loads((out_dir / "response.json").read_text(encoding="utf-8"))
        assert "assistant_text" in payload and "outcome" in payload

    def test_stage2_runs_from_stage1_checkpoint(self, tmp_path):
        manifest = gen_small_dataset(tmp_path / "ds", seed=4, num_images=8)
        run1 = tmp_path / "s1"
        assert run_cli(
            "train", "--data", str(manifest), "--stage", "1", "--out", str(run1),
            "--steps", "2", "--batch-size", "2", "--grad-accum", "1",
            "--model-preset", "tiny", "--unfreeze-all",
        ) == 0
        run2 = tmp_path / "s2"
        code = run_cli(
            "train", "--data", str(manifest), "--stage", "2", "--out", str(run2),
            "--steps", "2", "--batch-size", "2", "--grad-accum", "1",
            "--init-from", str(run1), "--unfreeze-all",
        )
        assert code == 0
        assert (run2 / "step_2" / "params.bin").exists()


class TestEvalCli:
    def _make_predictions(self, tmp_path, manifest):
        records = read_manifest(manifest)
        pred_dir = tmp_path / "preds"
        (pred_dir / "masks").mkdir(parents=True)
        lines = []
        for rec in records:
            src = manifest.parent / rec["mask_path"]
            dst = pred_dir / "masks" / Path(rec["mask_path"]).name
            shutil.copyfile(src, dst)
            reference = [t["text"] for t in rec["turns"] if t["role"] == "assistant"][-1]
            lines.append(json.dumps({
                "sample_id": rec["sample_id"],
                "response_text": reference,
                "mask_path": f"masks/{dst.name}",
            }))
        pred_file = pred_dir / "predictions.jsonl"
        pred_file.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return pred_file

    def test_perfect_predictions_report(self, tmp_path):
        manifest = gen_small_dataset(tmp_path / "ds", seed=6)
        pred_file = self._make_predictions(tmp_path, manifest)
        report_path = tmp_path / "report.json"
        code = run_cli("eval", "--pred", str(pred_file), "--data", str(manifest),
                       "--metrics", "seg,text", "--out", str(report_path))
        assert code == 0
        report = json.loads(report_path.read_text(encoding="utf-8"))
        assert report["segmentation"]["ciou"] == 1.0
        assert report["response"]["rougeL"] == pytest.approx(1.0)
        assert report["response"]["bert_score"].startswith("unavailable")

    def test_judge_metrics_with_stub(self, tmp_path):
        manifest = gen_small_dataset(tmp_path / "ds", seed=7)
        pred_file = self._make_predictions(tmp_path, manifest)
        report_path = tmp_path / "report.json"
        code = run_cli("eval", "--pred", str(pred_file), "--data", str(manifest),
                       "--metrics", "judge", "--judge", "stub", "--judge-stub-score", "5",
                       "--out", str(report_path))
        assert code == 0
        report = json.loads(report_path.read_text(encoding="utf-8"))
        assert report["reasoning"]["pr"] == 5.0
        assert report["reasoning"]["unscored"] == 0

    def test_missing_manifest_exit_one(self, tmp_path, capsys):
        pred = tmp_path / "p.jsonl"
        pred.write_text("", encoding="utf-8")
        code = run_cli("eval", "--pred", str(pred), "--data", str(tmp_path / "absent.jsonl"))
        assert code == 1
        assert "absent.jsonl" in json.loads(capsys.readouterr().err)["detail"]

    def test_unknown_metric_rejected(self, tmp_path, capsys):
        manifest = gen_small_dataset(tmp_path / "ds", seed=8)
        pred_file = self._make_predictions(tmp_path, manifest)
        code = run_cli("eval", "--pred", str(pred_file), "--data", str(manifest),
                       "--metrics", "seg,bogus")
        assert code == 1
