"""Hyperparameters of a training run."""

from dataclasses import asdict, dataclass, field
from typing import Any

from src.data.augment import AugmentConfig

METHODS = ("teacher", "student", "kd", "fitnet", "dln", "ktan", "ktan_kd")

# Methods that need a pretrained teacher.
TRANSFER_METHODS = ("kd", "fitnet", "dln", "ktan", "ktan_kd")

ADVERSARIAL_METHODS = ("ktan", "ktan_kd")


@dataclass
class TrainConfig:
    """Every scalar hyperparameter of a run.

    Defaults: SGD with batch 32,
    learning rate 0.2 (1e-2 for the adversarial stage), weight decay 1e-4,
    alpha 0.6, beta 0.5, KD temperature 4 with teacher weight 0.9 and a
    FitNet transfer weight of 4.
    """

    method: str = "ktan"
    seed: int = 0
    epochs: int = 10
    batch_size: int = 32
    precision: str = "single"

    # Loss weights
    alpha: float = 0.6
    beta: float = 0.5
    temperature: float = 4.0
    kd_weight: float = 0.9
    kd_t_squared: bool = True
    fitnet_weight: float = 4.0

    # Optimizer
    lr_main: float = 0.2
    lr_adversarial: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_decay_epochs: list[int] = field(default_factory=list)
    lr_decay_factor: float = 0.1

    # Schedule: k pretraining steps, then adversarial iterations
    k_pretrain_steps: int | None = None
    k_pretrain_epochs: int | None = None
    adversarial_iterations: int | None = None
    d_steps: int = 1

    # Discriminator and regressor
    discriminator_channels: int = 16
    regressor_stride: int = 1
    regressor_padding: int = 0
    regressor_lr: float = 1e-2
    regressor_steps: int | None = None

    augment: AugmentConfig = field(default_factory=AugmentConfig)
    eval_train_accuracy: bool = True

    @property
    def transfer_weight(self) -> float:
        """Weight of the feature-map MSE term for this method."""
        if self.method == "fitnet":
            return self.fitnet_weight
        if self.method in ("dln", "ktan", "ktan_kd"):
            return self.beta
        return 0.0

    @property
    def uses_kd(self) -> bool:
        """True when the label term is the distillation loss."""
        return self.method in ("kd", "ktan_kd")

    @property
    def adversarial_weight(self) -> float:
        """Weight of the generator adversarial term for this method."""
        return self.alpha if self.method in ADVERSARIAL_METHODS else 0.0

    @property
    def needs_teacher(self) -> bool:
        """True when the method consumes teacher outputs."""
        return self.method in TRANSFER_METHODS

    @property
    def needs_regressor(self) -> bool:
        """True when teacher maps must be regressed onto the student shape."""
        if self.transfer_weight > 0:
            return True
        return self.method in ADVERSARIAL_METHODS and self.adversarial_iterations != 0

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return asdict(self)


def validate_train_config(cfg: TrainConfig) -> list[str]:
    """Validate a configuration, returning human-readable issues.

    Args:
        cfg: Configuration to validate.

    Returns:
        List of validation issue messages (empty when valid).
    """
    issues = []

    if cfg.method not in METHODS:
        issues.append(f"Invalid method: {cfg.method!r} (expected one of {', '.join(METHODS)})")

    if cfg.batch_size < 1:
        issues.append("batch_size must be >= 1")
    if cfg.epochs < 1:
        issues.append("epochs must be >= 1")
    if cfg.precision not in ("single", "double"):
        issues.append(f"Invalid precision: {cfg.precision!r}")

    for name in (
        "alpha",
        "beta",
        "fitnet_weight",
        "lr_main",
        "lr_adversarial",
        "momentum",
        "weight_decay",
        "regressor_lr",
        "lr_decay_factor",
    ):
        if getattr(cfg, name) < 0:
            issues.append(f"{name} cannot be negative")

    if cfg.temperature <= 0:
        issues.append("temperature must be positive")
    if not 0.0 <= cfg.kd_weight <= 1.0:
        issues.append("kd_weight must lie in [0, 1]")

    if cfg.k_pretrain_steps is not None and cfg.k_pretrain_epochs is not None:
        issues.append("Set at most one of k_pretrain_steps and k_pretrain_epochs")
    for name in ("k_pretrain_steps", "k_pretrain_epochs", "adversarial_iterations", "regressor_steps"):
        value = getattr(cfg, name)
        if value is not None and value < 0:
            issues.append(f"{name} cannot be negative")

    if cfg.d_steps < 1:
        issues.append("d_steps must be >= 1")
    if cfg.discriminator_channels < 1:
        issues.append("discriminator_channels must be >= 1")
    if cfg.regressor_stride < 1:
        issues.append("regressor_stride must be >= 1")
    if cfg.regressor_padding < 0:
        issues.append("regressor_padding cannot be negative")

    return issues
