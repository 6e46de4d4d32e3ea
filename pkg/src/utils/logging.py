"""Logging configuration and the metrics log writer."""

import json
import logging
import sys
from pathlib import Path

from src.models.records import MetricsRecord

# Create module logger
logger = logging.getLogger("ktan")


def setup_logging(
    level: str = "INFO",
    log_file: Path | None = None,
    verbose: bool = False,
) -> None:
    """Configure application logging.

    Args:
        level: Log level (DEBUG, INFO, WARNING, ERROR).
        log_file: Optional path to log file.
        verbose: If True, include timestamps and logger names.
    """
    log_level = getattr(logging, level.upper(), logging.INFO)
    logger.setLevel(logging.DEBUG if log_file else log_level)

    # Clear existing handlers
    logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    if verbose:
        console_format = logging.Formatter(
            "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
            datefmt="%H:%M:%S",
        )
    else:
        console_format = logging.Formatter("%(message)s")
    console_handler.setFormatter(console_format)
    logger.addHandler(console_handler)

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)  # Always verbose in file
        file_handler.setFormatter(
            logging.Formatter(
                "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
                datefmt="%Y-%m-%d %H:%M:%S",
            )
        )
        logger.addHandler(file_handler)


class MetricsLogger:
    """Collects MetricsRecords and appends them to JSONL files.

    `metrics.jsonl` holds one sorted-key JSON object per record and no
    timestamps. Wall-clock seconds go to the `timings.jsonl` sidecar.
    """

    def __init__(self, out_dir: Path | None = None) -> None:
        """Initialize metrics logger.

        Args:
            out_dir: Run output directory, whose metrics files are truncated;
                records are only kept in memory when None.
        """
        self.records: list[MetricsRecord] = []
        self.metrics_path: Path | None = None
        self.timings_path: Path | None = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            self.metrics_path = out_dir / "metrics.jsonl"
            self.timings_path = out_dir / "timings.jsonl"
            for path in (self.metrics_path, self.timings_path):
                path.write_text("", encoding="utf-8")

    def log_record(self, record: MetricsRecord) -> None:
        """Store a record and append it to the metrics files."""
        self.records.append(record)
        if record.phase == "eval":
            parts = [f"epoch {record.epoch}"]
            if record.train_accuracy is not None:
                parts.append(f"train {record.train_accuracy:.4f}")
            if record.test_accuracy is not None:
                parts.append(f"test {record.test_accuracy:.4f}")
            logger.info("eval: " + ", ".join(parts))
        else:
            losses = " ".join(f"{k}={v:.4f}" for k, v in sorted(record.losses.items()))
            logger.debug(f"{record.phase} {record.iteration}: {losses}")

        if self.metrics_path:
            with open(self.metrics_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        if self.timings_path:
            entry = {
                "phase": record.phase,
                "iteration": record.iteration,
                "seconds": round(record.wall_clock, 6),
            }
            with open(self.timings_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, sort_keys=True) + "\n")

    def log_phase_start(self, phase: str, steps: int) -> None:
        """Log start of a training phase."""
        logger.info(f"Starting {phase} phase: {steps} steps")

    def log_phase_complete(self, phase: str, steps: int, duration_seconds: float) -> None:
        """Log completion of a training phase."""
        logger.info(f"{phase} phase complete: {steps} steps in {duration_seconds:.1f}s")

    def phase_records(self, phase: str) -> list[MetricsRecord]:
        """Records of one phase, in emission order."""
        return [r for r in self.records if r.phase == phase]


def read_metrics(path: Path) -> list[MetricsRecord]:
    """Load a metrics.jsonl file."""
    with open(path, encoding="utf-8") as f:
        return [MetricsRecord.from_dict(json.loads(line)) for line in f if line.strip()]
