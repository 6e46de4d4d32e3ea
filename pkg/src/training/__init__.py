"""Losses, regressor, adversarial transfer training and method comparison."""

from src.training.compare import ComparisonReport, run_comparison
from src.training.config import METHODS, TrainConfig, validate_train_config
from src.training.evaluation import evaluate, predict
from src.training.experiment import ExperimentError, ExperimentResult, run_experiment
from src.training.ktan import (
    Model,
    Regressor,
    TrainingAbortedError,
    adversarial_step,
    pretrain_student,
)
from src.training.losses import LossError
from src.training.regressor import (
    RegressorGeometryError,
    RegressorSpec,
    solve_regressor_geometry,
    train_regressor,
)

__all__ = [
    "METHODS",
    "ComparisonReport",
    "ExperimentError",
    "ExperimentResult",
    "LossError",
    "Model",
    "Regressor",
    "RegressorGeometryError",
    "RegressorSpec",
    "TrainConfig",
    "TrainingAbortedError",
    "adversarial_step",
    "evaluate",
    "predict",
    "pretrain_student",
    "run_comparison",
    "run_experiment",
    "solve_regressor_geometry",
    "train_regressor",
    "validate_train_config",
]
