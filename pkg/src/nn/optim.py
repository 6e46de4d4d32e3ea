"""SGD with momentum and weight decay."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from src.nn.network import NetworkState
from src.tensor.tensor import NonFiniteError, ShapeError, Tensor


@dataclass
class OptimizerState:
    """Hyperparameters and per-parameter velocities of one optimizer."""

    learning_rate: float
    momentum: float = 0.9
    weight_decay: float = 1e-4
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.momentum < 0:
            raise ValueError(f"momentum must be >= 0, got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


def sgd_step(
    state: NetworkState,
    grads: Mapping[str, np.ndarray],
    opt: OptimizerState,
) -> NetworkState:
    """Apply one momentum SGD update to the unfrozen parameters.

    v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v

    Parameters without a gradient, or in a frozen group, are carried over
    unchanged (same tensor object). Velocities in `opt` are updated in place.

    Args:
        state: Current parameters.
        grads: Gradients keyed by parameter name.
        opt: Optimizer hyperparameters and velocities.

    Returns:
        New NetworkState holding the updated parameters.

    Raises:
        ShapeError: If a gradient names an unknown parameter or has the wrong shape.
        NonFiniteError: If a gradient or updated parameter is NaN or Inf.
    """
    updated = dict(state.parameters)
    for name, grad in grads.items():
        if name not in state.parameters:
            raise ShapeError(f"Gradient for unknown parameter {name!r}")
        if state.is_frozen(name):
            continue
        weight = state.parameters[name].data
        if grad.shape != weight.shape:
            raise ShapeError(f"{name}: gradient shape {grad.shape} != parameter {weight.shape}")
        if not np.isfinite(grad).all():
            raise NonFiniteError(f"{name}: gradient contains NaN or Inf")

        g = np.asarray(grad, dtype=weight.dtype)
        step = g + weight.dtype.type(opt.weight_decay) * weight if opt.weight_decay else g
        previous = opt.velocity.get(name)
        lr = weight.dtype.type(opt.learning_rate)
        if previous is None or not opt.momentum:
            velocity = -(lr * step)
        else:
            velocity = weight.dtype.type(opt.momentum) * previous - lr * step
        opt.velocity[name] = velocity

        new_weight = weight + velocity
        if not np.isfinite(new_weight).all():
            raise NonFiniteError(f"{name}: update produced NaN or Inf")
        updated[name] = Tensor.wrap(new_weight, name)
    return NetworkState(updated, dict(state.frozen))


def scheduled_learning_rate(
    base: float,
    epoch: int,
    decay_epochs: Sequence[int] = (),
    factor: float = 0.1,
) -> float:
    """Step decay: multiply `base` by `factor` once per milestone reached.

    Args:
        base: Initial learning rate.
        epoch: Zero-based current epoch.
        decay_epochs: Epochs at which the rate is multiplied by `factor`.
        factor: Decay multiplier.
    """
    reached = sum(1 for milestone in decay_epochs if epoch >= milestone)
    return base * factor**reached
