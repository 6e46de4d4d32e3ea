"""Network parameters and forward passes."""

from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from src.nn.layers import ConvLayer, DenseLayer, FlattenLayer, Layer, MaxPoolLayer, NetworkSpec
from src.tensor import ops
from src.tensor.tensor import ShapeError, Tensor, dtype_for


def group_of(name: str) -> str:
    """Parameter group of a parameter name ("generator.0.weight" -> "generator.0")."""
    return name.rsplit(".", 1)[0]


@dataclass
class NetworkState:
    """Learned parameters of a network.

    Attributes:
        parameters: Named tensors such as "generator.0.weight".
        frozen: Frozen flag per parameter group ("generator.0").
    """

    parameters: dict[str, Tensor]
    frozen: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.parameters:
            self.frozen.setdefault(group_of(name), False)

    @property
    def groups(self) -> list[str]:
        """Parameter group names in parameter order."""
        return list(dict.fromkeys(group_of(name) for name in self.parameters))

    def is_frozen(self, name: str) -> bool:
        """Check whether the group owning a parameter is frozen."""
        return self.frozen.get(group_of(name), False)

    def trainable(self) -> dict[str, Tensor]:
        """Parameters of unfrozen groups."""
        return {name: t for name, t in self.parameters.items() if not self.is_frozen(name)}

    def frozen_copy(self, groups: Iterable[str] | None = None) -> "NetworkState":
        """Return a state sharing the same tensors with groups marked frozen.

        Args:
            groups: Groups to freeze; all groups when omitted.
        """
        selected = set(self.groups if groups is None else groups)
        frozen = {g: self.frozen.get(g, False) or g in selected for g in self.groups}
        return NetworkState(dict(self.parameters), frozen)

    def unfrozen_copy(self) -> "NetworkState":
        """Return a state sharing the same tensors with every group trainable."""
        return NetworkState(dict(self.parameters), dict.fromkeys(self.groups, False))

    def arrays(self) -> dict[str, np.ndarray]:
        """Parameter values keyed by name."""
        return {name: t.data for name, t in self.parameters.items()}


def init_network(
    spec: NetworkSpec,
    seed: int | np.random.Generator,
    precision: str = "single",
) -> NetworkState:
    """Draw fresh parameters for a spec.

    Weights are zero-mean Gaussian with variance 2 / fan_in; biases are zero.

    Args:
        spec: Network specification.
        seed: Integer seed or a generator to draw from.
        precision: "single" or "double".

    Returns:
        NetworkState with every group trainable.
    """
    rng = np.random.default_rng(seed)
    dtype = dtype_for(precision)
    parameters: dict[str, Tensor] = {}
    for group, layer in spec.parameter_layers():
        if isinstance(layer, ConvLayer):
            weight_shape: tuple[int, ...] = layer.geometry.filter_shape
            fan_in = layer.geometry.fan_in
            out = layer.geometry.out_channels
        else:
            assert isinstance(layer, DenseLayer)
            weight_shape = (layer.in_features, layer.out_features)
            fan_in = layer.fan_in
            out = layer.out_features
        scale = np.sqrt(2.0 / fan_in)
        parameters[f"{group}.weight"] = Tensor(
            rng.standard_normal(weight_shape) * scale, dtype=dtype, name=f"{group}.weight"
        )
        parameters[f"{group}.bias"] = Tensor(np.zeros(out), dtype=dtype, name=f"{group}.bias")
    return NetworkState(parameters)


def _activate(x: Tensor, activation: str) -> Tensor:
    if activation == "relu":
        return ops.relu(x)
    if activation == "sigmoid":
        return ops.sigmoid(x)
    return x


def _apply(layer: Layer, group: str, state: NetworkState, x: Tensor) -> Tensor:
    if isinstance(layer, ConvLayer):
        out = ops.conv2d(
            x,
            state.parameters[f"{group}.weight"],
            state.parameters[f"{group}.bias"],
            layer.geometry,
        )
        return _activate(out, layer.activation)
    if isinstance(layer, DenseLayer):
        out = ops.dense(
            x, state.parameters[f"{group}.weight"], state.parameters[f"{group}.bias"]
        )
        return _activate(out, layer.activation)
    if isinstance(layer, MaxPoolLayer):
        return ops.max_pool2d(x, layer.size)
    assert isinstance(layer, FlattenLayer)
    return ops.flatten(x)


def forward_generator(state: NetworkState, spec: NetworkSpec, batch: Tensor) -> Tensor:
    """Run the convolutional part and return the last feature map.

    Args:
        state: Network parameters.
        spec: Network specification.
        batch: Images of shape [N, C, H, W].

    Returns:
        Feature map of shape [N, *spec.feature_shape].

    Raises:
        ShapeError: If the batch does not match the spec's input shape.
    """
    if batch.ndim != 4 or batch.shape[1:] != tuple(spec.input_shape):
        raise ShapeError(
            f"{spec.name}: expected input [N, {', '.join(map(str, spec.input_shape))}], "
            f"got {batch.shape}"
        )
    x = batch
    for index, layer in enumerate(spec.generator_layers):
        x = _apply(layer, f"generator.{index}", state, x)
    return x


def forward_classifier(state: NetworkState, spec: NetworkSpec, feature_map: Tensor) -> Tensor:
    """Map a feature map to one output row per sample.

    Raises:
        ShapeError: If the map does not match the spec's split point.
    """
    if feature_map.shape[1:] != spec.feature_shape:
        raise ShapeError(
            f"{spec.name}: classifier expects maps of shape {spec.feature_shape}, "
            f"got {feature_map.shape[1:]}"
        )
    x = feature_map
    for index, layer in enumerate(spec.classifier_layers):
        x = _apply(layer, f"classifier.{index}", state, x)
    return x


def forward(state: NetworkState, spec: NetworkSpec, batch: Tensor) -> Tensor:
    """Generator followed by classifier."""
    return forward_classifier(state, spec, forward_generator(state, spec, batch))


def generator_parameters(state: NetworkState) -> dict[str, Tensor]:
    """Parameters of the generator groups."""
    return {n: t for n, t in state.parameters.items() if n.startswith("generator.")}


def classifier_parameters(state: NetworkState) -> dict[str, Tensor]:
    """Parameters of the classifier groups."""
    return {n: t for n, t in state.parameters.items() if n.startswith("classifier.")}
