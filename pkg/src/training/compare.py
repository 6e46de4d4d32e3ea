"""Method comparison over several seeds.

Per seed the teacher is trained first, then the regressor against it, then
every requested method with both injected. A failing cell is recorded in
the run manifest and the matrix carries on.
"""

import json
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from src.data.dataset import Dataset
from src.models.records import CompareCell
from src.nn.architectures import build_architecture
from src.training.artifacts import regressor_checkpoint, save_model
from src.training.config import METHODS, TrainConfig
from src.training.experiment import ExperimentResult, prepare_regressor, run_experiment
from src.training.ktan import Model, Regressor
from src.training.schedule import RunStreams
from src.utils.checkpoint import save_checkpoint
from src.utils.logging import MetricsLogger, logger
from src.utils.manifest import RunManifest

# Expected ordering of mean test accuracy, strongest first. The pair
# (ktan, dln) may tie; every other neighbouring pair is strict.
EXPECTED_ORDER = ("teacher", "ktan", "dln", "student")
NON_STRICT_PAIRS = {("ktan", "dln")}

ProgressCallback = Callable[[int, int, str], None]


@dataclass
class MethodStats:
    """Accuracy statistics of one method across seeds."""

    method: str
    accuracies: list[float] = field(default_factory=list)
    failures: int = 0

    @property
    def mean(self) -> float | None:
        return float(np.mean(self.accuracies)) if self.accuracies else None

    @property
    def std(self) -> float | None:
        """Sample standard deviation (0 for a single seed)."""
        if not self.accuracies:
            return None
        if len(self.accuracies) == 1:
            return 0.0
        return float(np.std(self.accuracies, ddof=1))


@dataclass(frozen=True)
class OrderingCheck:
    """One neighbouring pair of the expected ordering."""

    upper: str
    lower: str
    relation: str
    holds: bool


@dataclass
class ComparisonReport:
    """Cells of a finished comparison and the derived statistics."""

    methods: list[str]
    seeds: list[int]
    cells: list[CompareCell]

    def stats(self) -> dict[str, MethodStats]:
        """Per-method statistics in requested method order."""
        stats = {m: MethodStats(m) for m in self.methods}
        for cell in self.cells:
            if cell.method not in stats:
                continue
            if cell.succeeded:
                assert cell.test_accuracy is not None
                stats[cell.method].accuracies.append(cell.test_accuracy)
            else:
                stats[cell.method].failures += 1
        return stats

    def ordering(self) -> list[OrderingCheck]:
        """Checks for the expected ordering, over methods with results."""
        stats = self.stats()
        present = [m for m in EXPECTED_ORDER if m in stats and stats[m].mean is not None]
        checks = []
        for upper, lower in zip(present, present[1:]):
            high, low = stats[upper].mean, stats[lower].mean
            assert high is not None and low is not None
            if (upper, lower) in NON_STRICT_PAIRS:
                checks.append(OrderingCheck(upper, lower, ">=", high >= low))
            else:
                checks.append(OrderingCheck(upper, lower, ">", high > low))
        return checks

    @property
    def verdict(self) -> bool | None:
        """True when every check holds; None when fewer than two methods have results."""
        checks = self.ordering()
        if not checks:
            return None
        return all(c.holds for c in checks)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "methods": self.methods,
            "seeds": self.seeds,
            "stats": {
                m: {"mean": s.mean, "std": s.std, "accuracies": s.accuracies, "failures": s.failures}
                for m, s in self.stats().items()
            },
            "ordering": [
                {"upper": c.upper, "lower": c.lower, "relation": c.relation, "holds": c.holds}
                for c in self.ordering()
            ],
            "verdict": self.verdict,
            "cells": [c.to_dict() for c in sorted(self.cells, key=lambda c: (c.method, c.seed))],
        }

    def write_json(self, path: Path) -> None:
        """Write the report as sorted-key JSON."""
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_summary(path: Path, result: ExperimentResult) -> None:
    """Write a run's summary.json."""
    path.write_text(json.dumps(result.summary.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_cell(
    cfg: TrainConfig,
    cell_dir: Path,
    train: Dataset,
    test: Dataset,
    teacher: Model | None,
    regressor: Regressor | None,
) -> ExperimentResult:
    metrics = MetricsLogger(cell_dir)
    result = run_experiment(cfg, train, test, teacher=teacher, regressor=regressor, metrics=metrics)
    role = "teacher" if cfg.method == "teacher" else "student"
    checkpoint = cell_dir / f"{role}.ckpt"
    result.summary.checkpoint = checkpoint.name
    save_model(
        checkpoint,
        role,
        result.model,
        result.optimizer,
        cursor={"phase": "eval", "iteration": result.summary.steps, "epoch": result.summary.epochs},
        config_hash=result.summary.config_hash,
        summary=result.summary.to_dict(),
    )
    write_summary(cell_dir / "summary.json", result)
    return result


def _train_shared_regressor(
    cfg: TrainConfig,
    teacher: Model,
    train: Dataset,
    seed_dir: Path,
) -> Regressor:
    streams = RunStreams.from_seed(cfg.seed)
    student_spec = build_architecture("desk-student", train.image_shape, classes=train.class_count)
    regressor_dir = seed_dir / "regressor"
    metrics = MetricsLogger(regressor_dir)
    regressor = prepare_regressor(cfg, teacher, student_spec, train, streams, metrics)
    save_checkpoint(regressor_checkpoint(regressor), regressor_dir / "regressor.ckpt")
    return regressor


def run_comparison(
    configs: Mapping[str, TrainConfig],
    train: Dataset,
    test: Dataset,
    seeds: Sequence[int],
    out_dir: Path,
    progress_callback: ProgressCallback | None = None,
) -> ComparisonReport:
    """Run every configured method for every seed.

    Args:
        configs: Config per method name; must include "teacher" when any
            transfer method is requested.
        train: Training split shared by all runs.
        test: Test split shared by all runs.
        seeds: Run seeds; each overrides the configs' own seed.
        out_dir: Root directory; runs go to `seed-<s>/<method>/`.
        progress_callback: Called with (done, total, description).

    Returns:
        ComparisonReport over all cells.
    """
    unknown = sorted(set(configs) - set(METHODS))
    if unknown:
        raise ValueError(f"Unknown methods in comparison: {', '.join(unknown)}")
    methods = [m for m in METHODS if m in configs]
    total = len(methods) * len(seeds)
    done = 0

    with RunManifest(out_dir / "runs.json") as manifest:
        manifest.clear()
        for seed in seeds:
            seed_dir = out_dir / f"seed-{seed}"
            teacher: Model | None = None
            regressor: Regressor | None = None

            for method in methods:
                cfg = replace(configs[method], seed=seed)
                cell_dir = seed_dir / method
                manifest.record_cell(CompareCell(method, seed, status="pending", output_dir=str(cell_dir)))
                if progress_callback:
                    progress_callback(done, total, f"seed {seed}: {method}")

                try:
                    if cfg.needs_teacher:
                        teacher_cell = manifest.get_cell("teacher", seed)
                        if teacher_cell is not None and teacher_cell.status == "failed":
                            raise RuntimeError(f"Teacher training failed: {teacher_cell.error}")
                        if teacher is None:
                            raise RuntimeError("No teacher config in comparison")
                        if regressor is None and cfg.needs_regressor:
                            regressor = _train_shared_regressor(
                                replace(configs.get("ktan", cfg), seed=seed), teacher, train, seed_dir
                            )
                    result = _run_cell(cfg, cell_dir, train, test, teacher, regressor)
                    if method == "teacher":
                        teacher = result.model
                    manifest.update_status(method, seed, "ok", result.summary.final_test_accuracy)
                except Exception as e:
                    logger.error(f"seed {seed} {method} failed: {e}")
                    manifest.update_status(method, seed, "failed", error=str(e))
                done += 1

        failed = manifest.get_cells_by_status("failed")
        if failed:
            logger.warning(f"{len(failed)} of {total} runs failed")
        cells = manifest.all_cells()

    if progress_callback:
        progress_callback(done, total, "done")
    return ComparisonReport(methods, list(seeds), cells)
