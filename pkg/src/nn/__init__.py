"""Layer composition, parameter initialization and the SGD optimizer."""

from src.nn.architectures import ARCHITECTURES, build_architecture
from src.nn.layers import (
    ConvLayer,
    DenseLayer,
    FlattenLayer,
    MaxPoolLayer,
    NetworkSpec,
    NetworkSpecError,
)
from src.nn.network import (
    NetworkState,
    forward,
    forward_classifier,
    forward_generator,
    init_network,
)
from src.nn.optim import OptimizerState, scheduled_learning_rate, sgd_step

__all__ = [
    "ARCHITECTURES",
    "ConvLayer",
    "DenseLayer",
    "FlattenLayer",
    "MaxPoolLayer",
    "NetworkSpec",
    "NetworkSpecError",
    "NetworkState",
    "OptimizerState",
    "build_architecture",
    "forward",
    "forward_classifier",
    "forward_generator",
    "init_network",
    "scheduled_learning_rate",
    "sgd_step",
]
