"""Tests for the command-line interface."""

import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from src.cli.commands import EXIT_NON_FINITE, app
from src.cli.config import ExperimentConfig, load_config
from src.utils.checkpoint import load_checkpoint
from src.utils.logging import read_metrics

runner = CliRunner()

TINY_CONFIG = """\
seed: 0
dataset:
  classes: 3
  samples_per_class: 8
  test_samples_per_class: 4
  image_size: 8
teacher:
  epochs: 1
  checkpoint: {teacher}
method:
  name: {method}
  epochs: 2
  batch_size: 8
optimizer:
  learning_rate: {lr}
adversarial:
  k_pretrain_steps: 2
  iterations: 2
regressor:
  steps: 2
output:
  directory: {out}
"""


def _write_config(tmp_path: Path, method: str, out: str, teacher: str = "null", lr: str = "0.02") -> Path:
    path = tmp_path / f"{method}.yaml"
    path.write_text(TINY_CONFIG.format(method=method, out=out, teacher=teacher, lr=lr), encoding="utf-8")
    return path


class TestInitConfig:
    """Tests for the init-config command."""

    def test_writes_reference(self, tmp_path: Path):
        """Test that the written file parses to the defaults."""
        path = tmp_path / "config.yaml"
        result = runner.invoke(app, ["init-config", str(path)])
        assert result.exit_code == 0
        assert load_config(path) == ExperimentConfig()

    def test_refuses_overwrite(self, tmp_path: Path):
        """Test that an existing file is kept without --overwrite."""
        path = tmp_path / "config.yaml"
        path.write_text("seed: 1\n", encoding="utf-8")
        result = runner.invoke(app, ["init-config", str(path)])
        assert result.exit_code == 1
        assert path.read_text(encoding="utf-8") == "seed: 1\n"
        assert runner.invoke(app, ["init-config", str(path), "--overwrite"]).exit_code == 0


class TestValidationExits:
    """Tests for configuration and prerequisite failures."""

    def test_invalid_method(self, tmp_path: Path):
        """Test that an unknown method exits with status 1."""
        path = _write_config(tmp_path, "distill", str(tmp_path / "out"))
        result = runner.invoke(app, ["train", "--config", str(path)])
        assert result.exit_code == 1
        assert not (tmp_path / "out").exists()

    def test_unknown_key(self, tmp_path: Path):
        """Test that a misspelled key exits with status 1."""
        path = tmp_path / "bad.yaml"
        path.write_text("method:\n  nmae: ktan\n", encoding="utf-8")
        result = runner.invoke(app, ["train", "--config", str(path)])
        assert result.exit_code == 1
        assert "method.nmae" in result.output

    def test_transfer_without_teacher(self, tmp_path: Path):
        """Test that transfer methods need a teacher checkpoint."""
        path = _write_config(tmp_path, "kd", str(tmp_path / "out"))
        result = runner.invoke(app, ["train", "--config", str(path)])
        assert result.exit_code == 1

    def test_output_collision(self, tmp_path: Path):
        """Test that a non-empty output directory needs --overwrite."""
        out = tmp_path / "out"
        out.mkdir()
        (out / "keep.txt").write_text("x", encoding="utf-8")
        path = _write_config(tmp_path, "student", str(out))
        result = runner.invoke(app, ["train", "--config", str(path)])
        assert result.exit_code == 1
        assert (out / "keep.txt").exists()

    def test_divergence_exit_status(self, tmp_path: Path):
        """Test that a non-finite loss exits with its own status."""
        path = _write_config(tmp_path, "student", str(tmp_path / "out"), lr="1.0e+35")
        result = runner.invoke(app, ["train", "--config", str(path)])
        assert result.exit_code == EXIT_NON_FINITE


class TestGradcheckCommand:
    """Tests for the gradcheck command."""

    def test_all_pass(self):
        """Test that the shipped gradient checks pass."""
        result = runner.invoke(app, ["gradcheck"])
        assert result.exit_code == 0
        assert "26 gradient checks passed" in result.output

    def test_impossible_tolerance_fails(self):
        """Test that a zero tolerance reports failures."""
        result = runner.invoke(app, ["gradcheck", "--tolerance", "0"])
        assert result.exit_code == 1


@pytest.mark.integration
class TestTrainingPipeline:
    """End-to-end: teacher, regressor, student and evaluation through the CLI."""

    def test_teacher_then_ktan(self, tmp_path: Path):
        """Test the full pipeline on a tiny synthetic dataset."""
        teacher_dir = tmp_path / "teacher"
        path = _write_config(tmp_path, "teacher", str(teacher_dir))
        result = runner.invoke(app, ["--threads", "1", "train-teacher", "--config", str(path)])
        assert result.exit_code == 0, result.output
        teacher_ckpt = teacher_dir / "teacher.ckpt"
        assert load_checkpoint(teacher_ckpt).role == "teacher"
        for name in ("metrics.jsonl", "timings.jsonl", "summary.json", "config.yaml"):
            assert (teacher_dir / name).exists()

        regressor_dir = tmp_path / "regressor"
        path = _write_config(tmp_path, "ktan", str(regressor_dir), teacher=str(teacher_ckpt))
        result = runner.invoke(app, ["train-regressor", "--config", str(path)])
        assert result.exit_code == 0, result.output
        regressor_summary = json.loads((regressor_dir / "summary.json").read_text(encoding="utf-8"))
        assert regressor_summary["steps"] == 2
        assert regressor_summary["student_shape"] == [16, 2, 2]

        student_dir = tmp_path / "ktan"
        result = runner.invoke(app, ["train", "--config", str(path), "--out", str(student_dir)])
        assert result.exit_code == 0, result.output
        records = read_metrics(student_dir / "metrics.jsonl")
        assert [r.phase for r in records if r.phase != "eval"] == (
            ["regressor"] * 2 + ["pretrain"] * 2 + ["adversarial"] * 2
        )
        summary = json.loads((student_dir / "summary.json").read_text(encoding="utf-8"))
        assert summary["method"] == "ktan"
        assert summary["checkpoint"] == "student.ckpt"
        assert (student_dir / "regressor.ckpt").exists()

        result = runner.invoke(
            app, ["eval", "--checkpoint", str(student_dir / "student.ckpt"), "--config", str(path)]
        )
        assert result.exit_code == 0, result.output
        assert "Matches" in result.output

    def test_rerun_is_byte_identical(self, tmp_path: Path):
        """Test that two runs with one seed write identical metrics."""
        outputs = []
        for name in ("a", "b"):
            path = _write_config(tmp_path, "student", str(tmp_path / name))
            assert runner.invoke(app, ["train", "--config", str(path)]).exit_code == 0
            outputs.append((tmp_path / name / "metrics.jsonl").read_bytes())
        assert outputs[0] == outputs[1]
