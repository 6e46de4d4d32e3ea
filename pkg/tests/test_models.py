"""Tests for data models."""

import json
import math
from pathlib import Path

import pytest

from src.models.records import CompareCell, MetricsRecord, RunSummary
from src.utils.logging import MetricsLogger, read_metrics


class TestMetricsRecord:
    """Tests for MetricsRecord."""

    def test_flat_keys(self):
        """Test that losses flatten to loss_<component> keys."""
        record = MetricsRecord(
            phase="adversarial",
            iteration=7,
            epoch=2,
            losses={"ce": 1.25, "adv_g": 0.5, "adv_d": 1.0, "total": 2.0},
            d_teacher=0.75,
            d_student=0.25,
            learning_rate=0.01,
            wall_clock=3.5,
        )
        assert record.to_dict() == {
            "phase": "adversarial",
            "iteration": 7,
            "epoch": 2,
            "loss_ce": 1.25,
            "loss_adv_g": 0.5,
            "loss_adv_d": 1.0,
            "loss_total": 2.0,
            "d_teacher": 0.75,
            "d_student": 0.25,
            "lr": 0.01,
        }

    def test_eval_record_omits_absent_fields(self):
        """Test that an eval record without train accuracy has no such key."""
        data = MetricsRecord(phase="eval", iteration=3, epoch=0, test_accuracy=0.5).to_dict()
        assert "train_accuracy" not in data
        assert not any(k.startswith("loss_") for k in data)

    def test_from_dict(self):
        """Test rebuilding a record from its flat form."""
        data = {"phase": "pretrain", "iteration": 1, "epoch": 0, "loss_ce": 2.0, "loss_total": 2.0, "lr": 0.2}
        record = MetricsRecord.from_dict(data)
        assert record.losses == {"ce": 2.0, "total": 2.0}
        assert record.learning_rate == 0.2
        assert record.to_dict() == data

    def test_unknown_phase(self):
        """Test that unknown phases are rejected."""
        with pytest.raises(ValueError, match="phase"):
            MetricsRecord(phase="warmup", iteration=0)

    def test_unknown_loss_component(self):
        """Test that unknown loss keys are rejected."""
        with pytest.raises(ValueError, match="loss components"):
            MetricsRecord(phase="pretrain", iteration=0, losses={"l2": 1.0})

    def test_is_finite(self):
        """Test finiteness of the recorded losses."""
        assert MetricsRecord(phase="pretrain", iteration=0, losses={"ce": 1.0}).is_finite
        assert not MetricsRecord(phase="pretrain", iteration=0, losses={"ce": math.nan}).is_finite


class TestRunSummary:
    """Tests for RunSummary."""

    def test_roundtrip(self):
        """Test dictionary conversion."""
        summary = RunSummary(
            method="dln",
            seed=1,
            epochs=2,
            steps=6,
            final_train_accuracy=None,
            final_test_accuracy=0.5,
            best_epoch=0,
            best_test_accuracy=0.5,
            config_hash="abc",
            checkpoint="student.ckpt",
        )
        assert RunSummary.from_dict(summary.to_dict()) == summary


class TestCompareCell:
    """Tests for CompareCell."""

    def test_succeeded(self):
        """Test that only finished cells with an accuracy count."""
        assert CompareCell("ktan", 0, status="ok", test_accuracy=0.9).succeeded
        assert not CompareCell("ktan", 0, status="ok").succeeded
        assert not CompareCell("ktan", 0, status="failed", error="boom").succeeded
        assert not CompareCell("ktan", 0).succeeded


class TestMetricsLogger:
    """Tests for MetricsLogger."""

    def test_memory_only(self):
        """Test that records are kept without an output directory."""
        metrics = MetricsLogger()
        metrics.log_record(MetricsRecord(phase="regressor", iteration=0, losses={"ce": 1.0}))
        metrics.log_record(MetricsRecord(phase="pretrain", iteration=0, losses={"ce": 1.0}))
        assert [r.phase for r in metrics.phase_records("regressor")] == ["regressor"]
        assert metrics.metrics_path is None

    def test_files(self, tmp_path: Path):
        """Test metrics and timings files and reading them back."""
        metrics = MetricsLogger(tmp_path)
        records = [
            MetricsRecord(phase="pretrain", iteration=0, losses={"ce": 1.5, "total": 1.5}, wall_clock=0.25),
            MetricsRecord(phase="eval", iteration=0, test_accuracy=0.75, wall_clock=0.5),
        ]
        for record in records:
            metrics.log_record(record)

        lines = (tmp_path / "metrics.jsonl").read_text(encoding="utf-8").splitlines()
        assert json.loads(lines[0]) == records[0].to_dict()
        assert "seconds" not in lines[0]
        timings = [json.loads(line) for line in (tmp_path / "timings.jsonl").read_text(encoding="utf-8").splitlines()]
        assert [t["seconds"] for t in timings] == [0.25, 0.5]
        assert [r.to_dict() for r in read_metrics(tmp_path / "metrics.jsonl")] == [r.to_dict() for r in records]

    def test_truncates_previous_run(self, tmp_path: Path):
        """Test that a new logger starts from empty files."""
        MetricsLogger(tmp_path).log_record(MetricsRecord(phase="eval", iteration=0, test_accuracy=0.1))
        MetricsLogger(tmp_path)
        assert (tmp_path / "metrics.jsonl").read_text(encoding="utf-8") == ""
        assert read_metrics(tmp_path / "metrics.jsonl") == []
