"""Declarative layer descriptors and network specifications."""

from dataclasses import dataclass, field
from typing import Any, Union

from src.tensor.geometry import ConvGeometry, GeometryError, output_extent

ACTIVATIONS = {"none", "relu", "sigmoid"}


class NetworkSpecError(Exception):
    """Raised when a network specification is inconsistent."""

    pass


@dataclass(frozen=True)
class ConvLayer:
    """Convolution followed by an activation."""

    geometry: ConvGeometry
    activation: str = "relu"

    kind = "conv"

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape (C, H, W) produced from an input of the given shape."""
        if len(shape) != 3 or shape[0] != self.geometry.in_channels:
            raise NetworkSpecError(
                f"conv expects ({self.geometry.in_channels}, H, W) input, got {shape}"
            )
        return (self.geometry.out_channels, *self.geometry.output_hw(shape[1], shape[2]))

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {"kind": self.kind, "geometry": self.geometry.to_dict(), "activation": self.activation}


@dataclass(frozen=True)
class MaxPoolLayer:
    """Non-overlapping max pooling."""

    size: int = 2

    kind = "maxpool"

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape (C, H, W) produced from an input of the given shape."""
        if len(shape) != 3:
            raise NetworkSpecError(f"maxpool expects (C, H, W) input, got {shape}")
        if self.size < 1:
            raise GeometryError(f"maxpool: empty pooling window (size={self.size})")
        return (
            shape[0],
            output_extent(shape[1], self.size, self.size, 0),
            output_extent(shape[2], self.size, self.size, 0),
        )

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {"kind": self.kind, "size": self.size}


@dataclass(frozen=True)
class FlattenLayer:
    """Collapse (C, H, W) into a feature vector."""

    kind = "flatten"

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape produced from an input of the given shape."""
        total = 1
        for extent in shape:
            total *= extent
        return (total,)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {"kind": self.kind}


@dataclass(frozen=True)
class DenseLayer:
    """Fully connected layer followed by an activation."""

    in_features: int
    out_features: int
    activation: str = "none"

    kind = "dense"

    @property
    def fan_in(self) -> int:
        """Number of inputs feeding one output."""
        return self.in_features

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape produced from an input of the given shape."""
        if shape != (self.in_features,):
            raise NetworkSpecError(f"dense expects ({self.in_features},) input, got {shape}")
        return (self.out_features,)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "kind": self.kind,
            "in_features": self.in_features,
            "out_features": self.out_features,
            "activation": self.activation,
        }


Layer = Union[ConvLayer, MaxPoolLayer, FlattenLayer, DenseLayer]


def layer_from_dict(data: dict[str, Any]) -> Layer:
    """Rebuild a layer descriptor from its dictionary form."""
    kind = data.get("kind")
    if kind == "conv":
        return ConvLayer(ConvGeometry.from_dict(data["geometry"]), data.get("activation", "relu"))
    if kind == "maxpool":
        return MaxPoolLayer(int(data["size"]))
    if kind == "flatten":
        return FlattenLayer()
    if kind == "dense":
        return DenseLayer(
            int(data["in_features"]), int(data["out_features"]), data.get("activation", "none")
        )
    raise NetworkSpecError(f"Unknown layer kind: {kind!r}")


@dataclass(frozen=True)
class NetworkSpec:
    """A network split into a convolutional generator and a classifier.

    The generator maps images to the feature map of its last layer; the
    classifier maps that feature map to logits (or probabilities).
    """

    name: str
    input_shape: tuple[int, int, int]
    generator_layers: tuple[Layer, ...] = field(default_factory=tuple)
    classifier_layers: tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Check that consecutive layer shapes are compatible.

        Raises:
            NetworkSpecError: On any incompatibility.
        """
        try:
            shape: tuple[int, ...] = tuple(self.input_shape)
            for layer in self.generator_layers:
                if isinstance(layer, (FlattenLayer, DenseLayer)):
                    raise NetworkSpecError("generator layers must be conv or maxpool")
                shape = layer.output_shape(shape)
            for layer in self.classifier_layers:
                if isinstance(layer, (ConvLayer, MaxPoolLayer)):
                    raise NetworkSpecError("classifier layers must be flatten or dense")
                shape = layer.output_shape(shape)
        except GeometryError as e:
            raise NetworkSpecError(f"{self.name}: {e}") from e
        for layer in (*self.generator_layers, *self.classifier_layers):
            activation = getattr(layer, "activation", "none")
            if activation not in ACTIVATIONS:
                raise NetworkSpecError(f"{self.name}: unknown activation {activation!r}")

    @property
    def feature_shape(self) -> tuple[int, ...]:
        """Shape (C, H, W) of the generator output, i.e. the split point."""
        shape: tuple[int, ...] = tuple(self.input_shape)
        for layer in self.generator_layers:
            shape = layer.output_shape(shape)
        return shape

    @property
    def output_size(self) -> int:
        """Width of the classifier output."""
        shape = self.feature_shape
        for layer in self.classifier_layers:
            shape = layer.output_shape(shape)
        if len(shape) != 1:
            raise NetworkSpecError(f"{self.name}: classifier does not end in a vector")
        return shape[0]

    def parameter_layers(self) -> list[tuple[str, Layer]]:
        """Layers that own parameters, with their group names."""
        groups: list[tuple[str, Layer]] = []
        for section, layers in (
            ("generator", self.generator_layers),
            ("classifier", self.classifier_layers),
        ):
            for index, layer in enumerate(layers):
                if isinstance(layer, (ConvLayer, DenseLayer)):
                    groups.append((f"{section}.{index}", layer))
        return groups

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        """Expected shape of every named parameter."""
        shapes: dict[str, tuple[int, ...]] = {}
        for group, layer in self.parameter_layers():
            if isinstance(layer, ConvLayer):
                shapes[f"{group}.weight"] = layer.geometry.filter_shape
                shapes[f"{group}.bias"] = (layer.geometry.out_channels,)
            elif isinstance(layer, DenseLayer):
                shapes[f"{group}.weight"] = (layer.in_features, layer.out_features)
                shapes[f"{group}.bias"] = (layer.out_features,)
        return shapes

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "generator_layers": [layer.to_dict() for layer in self.generator_layers],
            "classifier_layers": [layer.to_dict() for layer in self.classifier_layers],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NetworkSpec":
        """Create from dictionary."""
        c, h, w = (int(v) for v in data["input_shape"])
        return cls(
            name=data["name"],
            input_shape=(c, h, w),
            generator_layers=tuple(layer_from_dict(d) for d in data["generator_layers"]),
            classifier_layers=tuple(layer_from_dict(d) for d in data["classifier_layers"]),
        )
