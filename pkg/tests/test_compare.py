"""Tests for method comparison."""

import json
from dataclasses import replace
from pathlib import Path

import pytest

from src.models.records import CompareCell
from src.training.compare import ComparisonReport, run_comparison
from src.utils.manifest import RunManifest


def _cells(accuracies: dict[str, list[float]]) -> list[CompareCell]:
    return [
        CompareCell(method, seed, status="ok", test_accuracy=accuracy)
        for method, values in accuracies.items()
        for seed, accuracy in enumerate(values)
    ]


class TestComparisonReport:
    """Tests for ComparisonReport statistics and ordering."""

    def test_stats(self):
        """Test mean, sample deviation and failure counts."""
        cells = _cells({"student": [0.5, 0.7]})
        cells.append(CompareCell("student", 2, status="failed", error="diverged"))
        stats = ComparisonReport(["student"], [0, 1, 2], cells).stats()["student"]
        assert stats.mean == pytest.approx(0.6)
        assert stats.std == pytest.approx(0.1414213562)
        assert stats.failures == 1

    def test_single_seed_and_empty(self):
        """Test deviation for one seed and statistics without results."""
        cells = _cells({"student": [0.5]}) + [CompareCell("kd", 0, status="failed")]
        stats = ComparisonReport(["student", "kd"], [0], cells).stats()
        assert stats["student"].std == 0.0
        assert stats["kd"].mean is None and stats["kd"].std is None

    def test_expected_ordering_holds(self):
        """Test that ktan may tie dln while other pairs are strict."""
        report = ComparisonReport(
            ["teacher", "student", "dln", "ktan"],
            [0, 1],
            _cells({"teacher": [0.95, 0.93], "ktan": [0.9, 0.8], "dln": [0.8, 0.9], "student": [0.7, 0.7]}),
        )
        checks = report.ordering()
        assert [(c.upper, c.lower, c.relation) for c in checks] == [
            ("teacher", "ktan", ">"),
            ("ktan", "dln", ">="),
            ("dln", "student", ">"),
        ]
        assert report.verdict is True

    def test_strict_violation(self):
        """Test that a tie between dln and student fails the ordering."""
        report = ComparisonReport(
            ["student", "dln"],
            [0],
            _cells({"dln": [0.7], "student": [0.7]}),
        )
        assert report.verdict is False

    def test_skips_methods_without_results(self):
        """Test that the ordering only spans methods with results."""
        cells = _cells({"teacher": [0.9], "student": [0.6]}) + [CompareCell("dln", 0, status="failed")]
        report = ComparisonReport(["teacher", "student", "dln"], [0], cells)
        assert [(c.upper, c.lower) for c in report.ordering()] == [("teacher", "student")]

    def test_verdict_needs_two_methods(self):
        """Test that one method gives no verdict."""
        assert ComparisonReport(["kd"], [0], _cells({"kd": [0.5]})).verdict is None

    def test_write_json(self, tmp_path: Path):
        """Test the written report."""
        report = ComparisonReport(["teacher", "student"], [0], _cells({"teacher": [0.9], "student": [0.6]}))
        path = tmp_path / "out" / "report.json"
        report.write_json(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["verdict"] is True
        assert data["stats"]["student"]["accuracies"] == [0.6]
        assert [c["method"] for c in data["cells"]] == ["student", "teacher"]


class TestRunComparison:
    """Tests for run_comparison."""

    def test_unknown_method(self, tiny_config, tiny_splits, tmp_path: Path):
        """Test that unknown methods are rejected up front."""
        train, test = tiny_splits
        with pytest.raises(ValueError, match="bogus"):
            run_comparison({"bogus": tiny_config}, train, test, [0], tmp_path)

    def test_teacher_failure_fails_transfer_cells(self, tiny_config, tiny_splits, tmp_path: Path):
        """Test that a diverging teacher fails the cells that need it."""
        train, test = tiny_splits
        configs = {
            "teacher": replace(tiny_config, method="teacher", epochs=1, lr_main=1e35),
            "student": tiny_config,
            "dln": replace(tiny_config, method="dln"),
        }
        report = run_comparison(configs, train, test, [0], tmp_path)
        status = {c.method: c for c in report.cells}
        assert status["teacher"].status == "failed"
        assert status["student"].succeeded
        assert status["dln"].status == "failed"
        assert status["dln"].error.startswith("Teacher training failed")
        stored = json.loads((tmp_path / "runs.json").read_text(encoding="utf-8"))
        assert len(stored["runs"]) == 3

    def test_manifest_tracks_every_cell(self, tiny_config, tiny_splits, tmp_path: Path):
        """Each cell leaves the manifest as ok or failed, with its output directory."""
        train, test = tiny_splits
        configs = {
            "teacher": replace(tiny_config, method="teacher", epochs=1, lr_main=1e35),
            "student": tiny_config,
            "dln": replace(tiny_config, method="dln"),
        }
        run_comparison(configs, train, test, [0], tmp_path)
        with RunManifest(tmp_path / "runs.json") as manifest:
            assert manifest.get_cells_by_status("pending") == []
            assert {c.method for c in manifest.get_cells_by_status("failed")} == {"teacher", "dln"}
            student = manifest.get_cell("student", 0)
        assert student is not None and student.status == "ok"
        assert student.test_accuracy is not None
        assert student.output_dir == str(tmp_path / "seed-0" / "student")

    @pytest.mark.slow
    def test_matrix(self, tiny_config, tiny_splits, tmp_path: Path):
        """Test a small matrix with a shared teacher and regressor."""
        train, test = tiny_splits
        configs = {
            "teacher": replace(tiny_config, method="teacher", epochs=1),
            "student": tiny_config,
            "ktan": replace(tiny_config, method="ktan", k_pretrain_steps=2, adversarial_iterations=1),
        }
        calls = []
        report = run_comparison(
            configs, train, test, [0, 1], tmp_path, lambda done, total, _: calls.append((done, total))
        )
        assert all(c.succeeded for c in report.cells)
        assert len(report.cells) == 6
        assert calls[-1] == (6, 6)
        for seed in (0, 1):
            assert (tmp_path / f"seed-{seed}" / "regressor" / "regressor.ckpt").exists()
            assert (tmp_path / f"seed-{seed}" / "ktan" / "student.ckpt").exists()
            assert (tmp_path / f"seed-{seed}" / "teacher" / "teacher.ckpt").exists()
