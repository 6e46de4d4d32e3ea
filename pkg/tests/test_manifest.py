"""Tests for the comparison run manifest."""

import json
from pathlib import Path

from src.models.records import CompareCell
from src.utils.manifest import RunManifest


class TestRunManifest:
    """Tests for RunManifest class."""

    def test_record_cell(self, temp_manifest_path: Path):
        """Test recording a cell."""
        with RunManifest(temp_manifest_path) as manifest:
            cell = manifest.record_cell(CompareCell("ktan", 0, output_dir="runs/seed-0/ktan"))

            assert cell.method == "ktan"
            assert cell.status == "pending"

    def test_get_cell(self, temp_manifest_path: Path):
        """Test retrieving a cell."""
        with RunManifest(temp_manifest_path) as manifest:
            manifest.record_cell(CompareCell("dln", 3))

            cell = manifest.get_cell("dln", 3)
            assert cell is not None
            assert cell.seed == 3

            # Same method, other seed
            assert manifest.get_cell("dln", 4) is None

    def test_record_replaces_existing(self, temp_manifest_path: Path):
        """Test that recording the same (method, seed) twice keeps one entry."""
        with RunManifest(temp_manifest_path) as manifest:
            manifest.record_cell(CompareCell("student", 1))
            manifest.record_cell(CompareCell("student", 1, status="ok", test_accuracy=0.5))

            cells = manifest.all_cells()
            assert len(cells) == 1
            assert cells[0].succeeded

    def test_update_status(self, temp_manifest_path: Path):
        """Test updating cell status."""
        with RunManifest(temp_manifest_path) as manifest:
            manifest.record_cell(CompareCell("kd", 0))

            assert manifest.update_status("kd", 0, "failed", error="diverged")
            assert not manifest.update_status("kd", 9, "failed")

            cell = manifest.get_cell("kd", 0)
            assert cell.status == "failed"
            assert cell.error == "diverged"
            assert not cell.succeeded

    def test_get_cells_by_status(self, temp_manifest_path: Path):
        """Test filtering cells by status."""
        with RunManifest(temp_manifest_path) as manifest:
            for seed in range(5):
                status = "ok" if seed % 2 == 0 else "failed"
                manifest.record_cell(CompareCell("ktan", seed, status=status, test_accuracy=0.1 * seed))

            assert len(manifest.get_cells_by_status("ok")) == 3
            assert len(manifest.get_cells_by_status("failed")) == 2

    def test_all_cells_sorted(self, temp_manifest_path: Path):
        """Test that cells come back ordered by method, then seed."""
        with RunManifest(temp_manifest_path) as manifest:
            manifest.record_cell(CompareCell("teacher", 1))
            manifest.record_cell(CompareCell("dln", 2))
            manifest.record_cell(CompareCell("dln", 0))

            keys = [(c.method, c.seed) for c in manifest.all_cells()]
            assert keys == [("dln", 0), ("dln", 2), ("teacher", 1)]

    def test_clear(self, temp_manifest_path: Path):
        """Test removing every cell."""
        with RunManifest(temp_manifest_path) as manifest:
            manifest.record_cell(CompareCell("student", 0))
            manifest.clear()

            assert manifest.all_cells() == []

    def test_persistence(self, temp_manifest_path: Path):
        """Test that cells survive reopening and are stored without timestamps."""
        with RunManifest(temp_manifest_path) as manifest:
            manifest.record_cell(CompareCell("ktan", 0, status="ok", test_accuracy=0.75))

        with RunManifest(temp_manifest_path) as manifest:
            cell = manifest.get_cell("ktan", 0)
            assert cell.test_accuracy == 0.75

        stored = json.loads(temp_manifest_path.read_text(encoding="utf-8"))
        (entry,) = stored["runs"].values()
        assert set(entry) == {"method", "seed", "status", "test_accuracy", "error", "output_dir"}
