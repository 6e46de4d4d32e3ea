"""Records produced by training runs and comparisons."""

import math
from dataclasses import dataclass, field
from typing import Any

PHASES = ("regressor", "pretrain", "adversarial", "eval")

LOSS_KEYS = ("ce", "kd", "mse_fm", "adv_g", "adv_d", "total")


@dataclass
class MetricsRecord:
    """One line of a run's metrics log.

    Training records carry per-component losses; eval records carry
    accuracies. Wall-clock time is kept apart from the serialized form so the
    metrics file is reproducible byte-for-byte.
    """

    phase: str
    iteration: int
    epoch: int = 0
    losses: dict[str, float] = field(default_factory=dict)
    d_teacher: float | None = None
    d_student: float | None = None
    train_accuracy: float | None = None
    test_accuracy: float | None = None
    learning_rate: float | None = None
    wall_clock: float = 0.0

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise ValueError(f"Unknown phase {self.phase!r}")
        unknown = set(self.losses) - set(LOSS_KEYS)
        if unknown:
            raise ValueError(f"Unknown loss components: {sorted(unknown)}")

    @property
    def is_finite(self) -> bool:
        """True when every recorded loss is finite."""
        return all(math.isfinite(v) for v in self.losses.values())

    def to_dict(self) -> dict[str, Any]:
        """Flat, self-describing form; absent fields are omitted."""
        data: dict[str, Any] = {
            "phase": self.phase,
            "iteration": self.iteration,
            "epoch": self.epoch,
        }
        for key, value in self.losses.items():
            data[f"loss_{key}"] = value
        optional = {
            "d_teacher": self.d_teacher,
            "d_student": self.d_student,
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
            "lr": self.learning_rate,
        }
        data.update({k: v for k, v in optional.items() if v is not None})
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MetricsRecord":
        """Create from the flat dictionary form."""
        return cls(
            phase=data["phase"],
            iteration=data["iteration"],
            epoch=data.get("epoch", 0),
            losses={k[5:]: v for k, v in data.items() if k.startswith("loss_")},
            d_teacher=data.get("d_teacher"),
            d_student=data.get("d_student"),
            train_accuracy=data.get("train_accuracy"),
            test_accuracy=data.get("test_accuracy"),
            learning_rate=data.get("lr"),
        )


@dataclass
class RunSummary:
    """Final outcome of one training run."""

    method: str
    seed: int
    epochs: int
    steps: int
    final_train_accuracy: float | None
    final_test_accuracy: float
    best_epoch: int
    best_test_accuracy: float
    config_hash: str = ""
    checkpoint: str | None = None

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "method": self.method,
            "seed": self.seed,
            "epochs": self.epochs,
            "steps": self.steps,
            "final_train_accuracy": self.final_train_accuracy,
            "final_test_accuracy": self.final_test_accuracy,
            "best_epoch": self.best_epoch,
            "best_test_accuracy": self.best_test_accuracy,
            "config_hash": self.config_hash,
            "checkpoint": self.checkpoint,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunSummary":
        """Create from dictionary."""
        return cls(**data)


@dataclass
class CompareCell:
    """One (method, seed) entry of a comparison matrix."""

    method: str
    seed: int
    status: str = "pending"  # pending, ok, failed
    test_accuracy: float | None = None
    error: str | None = None
    output_dir: str | None = None

    @property
    def succeeded(self) -> bool:
        """True when the run finished and reported an accuracy."""
        return self.status == "ok" and self.test_accuracy is not None

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "method": self.method,
            "seed": self.seed,
            "status": self.status,
            "test_accuracy": self.test_accuracy,
            "error": self.error,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CompareCell":
        """Create from dictionary."""
        return cls(
            method=data["method"],
            seed=data["seed"],
            status=data.get("status", "pending"),
            test_accuracy=data.get("test_accuracy"),
            error=data.get("error"),
            output_dir=data.get("output_dir"),
        )
