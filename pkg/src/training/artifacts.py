"""Conversion between trained components and checkpoints."""

from pathlib import Path
from typing import Any

from src.nn.layers import NetworkSpec
from src.nn.network import NetworkState
from src.nn.optim import OptimizerState
from src.tensor.tensor import Tensor
from src.training.ktan import Model, Regressor
from src.training.regressor import RegressorSpec, RegressorState
from src.utils.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint


def model_checkpoint(
    role: str,
    model: Model,
    optimizer: OptimizerState | None = None,
    cursor: dict[str, Any] | None = None,
    config_hash: str = "",
    summary: dict[str, Any] | None = None,
) -> Checkpoint:
    """Package a network, its optional optimizer state and run metadata."""
    tensors = {f"network/{name}": t.data for name, t in model.state.parameters.items()}
    optimizer_meta = None
    if optimizer is not None:
        tensors.update({f"velocity/{n}": v for n, v in optimizer.velocity.items()})
        optimizer_meta = {
            "learning_rate": optimizer.learning_rate,
            "momentum": optimizer.momentum,
            "weight_decay": optimizer.weight_decay,
        }
    metadata = {
        "network": model.spec.to_dict(),
        "frozen": dict(sorted(model.state.frozen.items())),
        "optimizer": optimizer_meta,
        "cursor": cursor or {},
        "config_hash": config_hash,
        "summary": summary or {},
    }
    return Checkpoint(role, tensors, metadata)


def restore_model(checkpoint: Checkpoint) -> Model:
    """Rebuild the network stored in a checkpoint.

    Raises:
        CheckpointError: If the checkpoint holds no network or its shapes disagree.
    """
    if "network" not in checkpoint.metadata:
        raise CheckpointError(f"{checkpoint.role} checkpoint holds no network")
    spec = NetworkSpec.from_dict(checkpoint.metadata["network"])
    arrays = checkpoint.section("network")
    expected = spec.parameter_shapes()
    if set(arrays) != set(expected):
        raise CheckpointError(
            f"{spec.name}: checkpoint parameters {sorted(arrays)} do not match spec {sorted(expected)}"
        )
    for name, shape in expected.items():
        if tuple(arrays[name].shape) != shape:
            raise CheckpointError(f"{spec.name}: {name} has shape {arrays[name].shape}, expected {shape}")
    parameters = {name: Tensor(arrays[name], name=name) for name in expected}
    frozen = {str(k): bool(v) for k, v in checkpoint.metadata.get("frozen", {}).items()}
    return Model(spec, NetworkState(parameters, frozen))


def restore_optimizer(checkpoint: Checkpoint) -> OptimizerState | None:
    """Rebuild the optimizer state, if one was saved."""
    meta = checkpoint.metadata.get("optimizer")
    if not meta:
        return None
    return OptimizerState(
        meta["learning_rate"],
        meta["momentum"],
        meta["weight_decay"],
        velocity={n: v.copy() for n, v in checkpoint.section("velocity").items()},
    )


def regressor_checkpoint(
    regressor: Regressor,
    config_hash: str = "",
    summary: dict[str, Any] | None = None,
) -> Checkpoint:
    """Package a solved regressor and its weights."""
    tensors = {f"regressor/{n}": t.data for n, t in regressor.state.parameters.items()}
    metadata = {
        "regressor": regressor.spec.to_dict(),
        "trained": regressor.state.trained,
        "cursor": {"phase": "regressor"},
        "config_hash": config_hash,
        "summary": summary or {},
    }
    return Checkpoint("regressor", tensors, metadata)


def restore_regressor(checkpoint: Checkpoint) -> Regressor:
    """Rebuild the regressor stored in a checkpoint.

    Raises:
        CheckpointError: If the checkpoint holds no regressor or shapes disagree.
    """
    if "regressor" not in checkpoint.metadata:
        raise CheckpointError(f"{checkpoint.role} checkpoint holds no regressor")
    spec = RegressorSpec.from_dict(checkpoint.metadata["regressor"])
    arrays = checkpoint.section("regressor")
    geom = spec.geometry
    if arrays.get("weight") is None or arrays["weight"].shape != geom.filter_shape:
        raise CheckpointError(f"Regressor weight does not match kernel {spec.kernel}")
    if arrays.get("bias") is None or arrays["bias"].shape != (geom.out_channels,):
        raise CheckpointError("Regressor bias does not match output channels")
    state = RegressorState(
        Tensor(arrays["weight"], name="regressor.weight"),
        Tensor(arrays["bias"], name="regressor.bias"),
        trained=bool(checkpoint.metadata.get("trained", False)),
    )
    return Regressor(spec, state)


def load_model(path: Path, role: str | None = None) -> Model:
    """Load the network of a checkpoint file."""
    return restore_model(load_checkpoint(path, role))


def load_regressor(path: Path) -> Regressor:
    """Load a regressor checkpoint file."""
    return restore_regressor(load_checkpoint(path, "regressor"))


def save_model(
    path: Path,
    role: str,
    model: Model,
    optimizer: OptimizerState | None = None,
    **metadata: Any,
) -> None:
    """Write a network checkpoint file."""
    save_checkpoint(model_checkpoint(role, model, optimizer, **metadata), path)
