"""Run manifest using TinyDB for tracking the cells of a comparison matrix."""

from pathlib import Path
from typing import Any

from tinydb import Query, TinyDB

from src.models.records import CompareCell


class RunManifest:
    """Records the status of every (method, seed) run of a comparison.

    Uses TinyDB for lightweight JSON storage that is human-readable and
    survives an interrupted comparison. No timestamps are stored.
    """

    def __init__(self, manifest_path: Path) -> None:
        """Initialize with path to manifest database.

        Args:
            manifest_path: Path to manifest JSON file.
        """
        self.manifest_path = Path(manifest_path)
        self.manifest_path.parent.mkdir(parents=True, exist_ok=True)
        self._db = TinyDB(self.manifest_path, sort_keys=True, indent=1)
        self._runs = self._db.table("runs")

    def record_cell(self, cell: CompareCell) -> CompareCell:
        """Insert or replace the entry for a cell's (method, seed)."""
        Run = Query()
        self._runs.upsert(cell.to_dict(), (Run.method == cell.method) & (Run.seed == cell.seed))
        return cell

    def get_cell(self, method: str, seed: int) -> CompareCell | None:
        """Retrieve a cell by method and seed."""
        Run = Query()
        results = self._runs.search((Run.method == method) & (Run.seed == seed))
        if results:
            return CompareCell.from_dict(results[0])
        return None

    def update_status(
        self,
        method: str,
        seed: int,
        status: str,
        test_accuracy: float | None = None,
        error: str | None = None,
    ) -> bool:
        """Update status (and optionally accuracy or error) of a cell.

        Returns:
            True if a cell was updated.
        """
        Run = Query()
        updates: dict[str, Any] = {"status": status}
        if test_accuracy is not None:
            updates["test_accuracy"] = test_accuracy
        if error is not None:
            updates["error"] = error
        result = self._runs.update(updates, (Run.method == method) & (Run.seed == seed))
        return len(result) > 0

    def get_cells_by_status(self, status: str) -> list[CompareCell]:
        """Cells with the given status."""
        Run = Query()
        return [CompareCell.from_dict(r) for r in self._runs.search(Run.status == status)]

    def all_cells(self) -> list[CompareCell]:
        """All cells sorted by method, then seed."""
        cells = [CompareCell.from_dict(r) for r in self._runs.all()]
        return sorted(cells, key=lambda c: (c.method, c.seed))

    def clear(self) -> None:
        """Remove all cells."""
        self._runs.truncate()

    def close(self) -> None:
        """Close database connection."""
        self._db.close()

    def __enter__(self) -> "RunManifest":
        """Context manager entry."""
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        """Context manager exit."""
        self.close()
