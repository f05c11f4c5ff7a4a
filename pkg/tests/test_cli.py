import json
import os

import run_ppt
from config.settings import config_hash
from errors import NumericDomainError
from orchestrator.checkpoint import read_checkpoint
from orchestrator.reporter import read_metrics
from orchestrator.runner import ExperimentRunner
from tests.test_data import write_off_tree


def pretrain(write_config, out_dir, steps=2):
    path = write_config("pretrain.yaml", mode="pretrain", steps=steps)
    assert run_ppt.main(["pretrain", "--config", path, "--out-dir", out_dir]) == 0
    return os.path.join(out_dir, "pretrain.ckpt")


def tune(write_config, out_dir, backbone=None, **overrides):
    args = ["tune", "--config", write_config("tune.yaml", **overrides), "--out-dir", out_dir]
    if backbone:
        args += ["--checkpoint", backbone]
    assert run_ppt.main(args) == 0
    return os.path.join(out_dir, "tune.ckpt")


# ----------------------------------------------------------------------
# usage errors


def test_no_command_prints_help(capsys):
    assert run_ppt.main([]) == 2
    assert "usage" in capsys.readouterr().out


def test_missing_config_file(out_dir, tmp_path):
    assert run_ppt.main(["tune", "--config", str(tmp_path / "absent.yaml"), "--out-dir", out_dir]) == 2


def test_invalid_config(write_config, out_dir, capsys):
    assert run_ppt.main(["tune", "--config", write_config(context_length=20), "--out-dir", out_dir]) == 2
    assert "invalid configuration" in capsys.readouterr().out
    assert run_ppt.main(["tune", "--config", write_config(colour="red"), "--out-dir", out_dir]) == 2


def test_missing_required_key(tmp_path, out_dir):
    path = tmp_path / "partial.yaml"
    path.write_text("mode: tune\ncontext_length: 4\nadapter: none\n")
    assert run_ppt.main(["tune", "--config", str(path), "--out-dir", out_dir]) == 2


def test_tune_needs_a_config(out_dir):
    assert run_ppt.main(["tune", "--out-dir", out_dir]) == 2


# ----------------------------------------------------------------------
# commands


def test_dry_run_writes_nothing(write_config, out_dir, capsys):
    assert run_ppt.main(["tune", "--config", write_config(adapter="ffn"), "--out-dir", out_dir, "--dry-run"]) == 0
    out = capsys.readouterr().out
    assert "LEARNABLE PARAMETERS" in out
    assert f"Closed-form expectation: {4 * 16 + 12 * 24 + 24 + 24 * 12 + 12 + 2 * 12:,}" in out
    assert not os.path.exists(out_dir)


def test_pretrain_writes_checkpoint_and_metrics(write_config, out_dir):
    ckpt = pretrain(write_config, out_dir, steps=3)
    data = read_checkpoint(ckpt)
    assert data.run_config.mode == "pretrain"
    assert data.step == 3
    records = read_metrics(os.path.join(out_dir, "metrics.jsonl"))
    assert [r["step"] for r in records] == [1, 2, 3]
    assert {r["config_hash"] for r in records} == {config_hash(data.run_config)}
    assert records[0]["seeds"] == {"init": 5, "data": 3}


def test_tune_on_pretrained_backbone(write_config, out_dir, capsys):
    backbone = pretrain(write_config, os.path.join(out_dir, "pre"))
    ckpt = tune(write_config, out_dir, backbone, adapter="ptb")
    out = capsys.readouterr().out
    assert "PROMPT TUNING REPORT" in out
    assert "Overall Accuracy" in out
    tuned = read_checkpoint(ckpt)
    pre = read_checkpoint(backbone)
    for name, value in pre.params.items():
        assert (tuned.params[name] == value).all(), name
    record = read_metrics(os.path.join(out_dir, "metrics.jsonl"))[-1]
    assert record["config_hash"] == tuned.config_hash
    assert record["metrics"]["learnable"] == (
        4 * 16 + (12 * 36 + 36) + (12 * 12 + 12) + (12 * 24 + 24) + (24 * 12 + 12) + 4 * 12
    )


def test_backbone_shape_mismatch(write_config, out_dir):
    backbone = pretrain(write_config, os.path.join(out_dir, "pre"))
    path = write_config("wide.yaml", point_width=24)
    assert run_ppt.main(["tune", "--config", path, "--checkpoint", backbone, "--out-dir", out_dir]) == 2


def test_eval_and_templates(write_config, out_dir, capsys):
    ckpt = tune(write_config, out_dir)
    capsys.readouterr()
    assert run_ppt.main(["eval", "--checkpoint", ckpt, "--out-dir", out_dir, "--templates"]) == 0
    out = capsys.readouterr().out
    assert "EVALUATION REPORT" in out
    assert "MANUAL PROMPT BASELINES" in out
    assert "photo_of_a" in out


def test_eval_with_off_root_missing_classes(write_config, out_dir, tmp_path):
    ckpt = tune(write_config, out_dir)
    write_off_tree(tmp_path / "meshes")
    args = ["eval", "--checkpoint", ckpt, "--out-dir", out_dir, "--data-root", str(tmp_path / "meshes")]
    assert run_ppt.main(args) == 2


def test_interpret(write_config, out_dir, capsys):
    ckpt = tune(write_config, out_dir)
    capsys.readouterr()
    assert run_ppt.main(["interpret", "--checkpoint", ckpt, "--out-dir", out_dir]) == 0
    out = capsys.readouterr().out
    assert "LEARNED CONTEXT INTERPRETATION" in out
    assert "nearest word" in out


def test_interpret_pretrain_checkpoint(write_config, out_dir):
    ckpt = pretrain(write_config, out_dir)
    assert run_ppt.main(["interpret", "--checkpoint", ckpt, "--out-dir", out_dir]) == 2


def test_numeric_failure_exit_code(write_config, out_dir, monkeypatch):
    def explode(self, *args, **kwargs):
        raise NumericDomainError("softmax: non-finite input")

    monkeypatch.setattr(ExperimentRunner, "run_tune", explode)
    assert run_ppt.main(["tune", "--config", write_config(), "--out-dir", out_dir]) == 3


def test_tuning_is_reproducible(write_config, tmp_path):
    first = tune(write_config, str(tmp_path / "one"))
    second = tune(write_config, str(tmp_path / "two"))
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()


def test_out_dir_from_environment(write_config, tmp_path, monkeypatch):
    monkeypatch.setenv("PPT_OUT_DIR", str(tmp_path / "env"))
    assert run_ppt.main(["tune", "--config", write_config()]) == 0
    assert os.path.isfile(tmp_path / "env" / "tune.ckpt")


# ----------------------------------------------------------------------
# sweeps


def read_sweep(out_dir, axis):
    with open(os.path.join(out_dir, f"sweep_{axis}.json")) as f:
        return json.load(f)


def test_sweep_insert_position(write_config, out_dir, capsys):
    path = write_config(steps=1)
    assert run_ppt.main(["sweep", "--axis", "insert_position", "--config", path, "--out-dir", out_dir]) == 0
    rows = read_sweep(out_dir, "insert_position")
    assert [row["value"] for row in rows] == ["front", "middle", "end"]
    assert all("error" not in row for row in rows)
    assert "SWEEP: insert_position" in capsys.readouterr().out


def test_sweep_with_failing_cells(write_config, out_dir):
    path = write_config(steps=1)
    assert run_ppt.main(["sweep", "--axis", "context_length", "--config", path, "--out-dir", out_dir]) == 1
    rows = read_sweep(out_dir, "context_length")
    assert [row["value"] for row in rows] == [4, 8, 16, 32, 64]
    assert ["error" in row for row in rows] == [False, False, True, True, True]
    assert rows[1]["learnable"] == 8 * 16


def test_sweep_few_shot_sizes(write_config, out_dir):
    path = write_config(steps=1, train_per_class=16)
    args = ["sweep", "--axis", "few_shot", "--config", path, "--out-dir", out_dir, "--workers", "2"]
    assert run_ppt.main(args) == 0
    rows = read_sweep(out_dir, "few_shot")
    assert [row["train_size"] for row in rows] == [k * 3 for k in (1, 2, 4, 8, 16)]


def test_sweep_records_missing_backbone_per_cell(write_config, out_dir, tmp_path):
    path = write_config(steps=1)
    missing = str(tmp_path / "absent.ckpt")
    args = ["sweep", "--axis", "insert_position", "--config", path, "--checkpoint", missing, "--out-dir", out_dir]
    assert run_ppt.main(args) == 1
    rows = read_sweep(out_dir, "insert_position")
    assert [row["value"] for row in rows] == ["front", "middle", "end"]
    assert all("absent.ckpt" in row["error"] for row in rows)
