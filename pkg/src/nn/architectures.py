"""Named desk-scale architectures."""

from collections.abc import Callable

from src.nn.layers import (
    ConvLayer,
    DenseLayer,
    FlattenLayer,
    Layer,
    MaxPoolLayer,
    NetworkSpec,
    NetworkSpecError,
)
from src.tensor.geometry import ConvGeometry

Shape = tuple[int, int, int]


def _conv(in_channels: int, out_channels: int, padding: int = 1) -> ConvLayer:
    return ConvLayer(ConvGeometry.square(in_channels, out_channels, kernel=3, padding=padding))


def _classifier(features: tuple[int, ...], hidden: int | None, classes: int) -> tuple[Layer, ...]:
    width = 1
    for extent in features:
        width *= extent
    if hidden is None:
        return (FlattenLayer(), DenseLayer(width, classes))
    return (FlattenLayer(), DenseLayer(width, hidden, "relu"), DenseLayer(hidden, classes))


def desk_teacher(input_shape: Shape, classes: int) -> NetworkSpec:
    """Four conv blocks (16, 32, 32, 64 channels) with one 2x2 pool, then a 64-unit MLP."""
    channels = input_shape[0]
    generator: tuple[Layer, ...] = (
        _conv(channels, 16),
        _conv(16, 32),
        MaxPoolLayer(2),
        _conv(32, 32),
        _conv(32, 64),
    )
    spec = NetworkSpec("desk-teacher", input_shape, generator)
    return NetworkSpec(
        "desk-teacher", input_shape, generator, _classifier(spec.feature_shape, 64, classes)
    )


def desk_student(input_shape: Shape, classes: int) -> NetworkSpec:
    """Two conv blocks (8, 16 channels); the second is unpadded so its map is smaller."""
    channels = input_shape[0]
    generator: tuple[Layer, ...] = (
        _conv(channels, 8),
        MaxPoolLayer(2),
        _conv(8, 16, padding=0),
    )
    spec = NetworkSpec("desk-student", input_shape, generator)
    return NetworkSpec(
        "desk-student", input_shape, generator, _classifier(spec.feature_shape, 32, classes)
    )


def discriminator(input_shape: Shape, channels: int = 16) -> NetworkSpec:
    """One 3x3 conv, 2x2 pool, then a single sigmoid unit.

    The pool is left out when a feature-map extent is odd.
    """
    generator: list[Layer] = [_conv(input_shape[0], channels)]
    if input_shape[1] % 2 == 0 and input_shape[2] % 2 == 0:
        generator.append(MaxPoolLayer(2))
    spec = NetworkSpec("discriminator", input_shape, tuple(generator))
    width = 1
    for extent in spec.feature_shape:
        width *= extent
    return NetworkSpec(
        "discriminator",
        input_shape,
        tuple(generator),
        (FlattenLayer(), DenseLayer(width, 1, "sigmoid")),
    )


def aux_head(input_shape: Shape, classes: int) -> NetworkSpec:
    """Single dense layer over a flattened feature map."""
    return NetworkSpec("aux-head", input_shape, (), _classifier(input_shape, None, classes))


def hint_regressor(input_shape: Shape) -> NetworkSpec:
    """Pointwise (1x1) convolution that keeps the feature-map shape."""
    channels = input_shape[0]
    layer = ConvLayer(ConvGeometry.square(channels, channels, kernel=1), activation="none")
    return NetworkSpec("hint-regressor", input_shape, (layer,))


ARCHITECTURES: dict[str, Callable[..., NetworkSpec]] = {
    "desk-teacher": desk_teacher,
    "desk-student": desk_student,
    "discriminator": discriminator,
    "aux-head": aux_head,
    "hint-regressor": hint_regressor,
}


def build_architecture(name: str, input_shape: Shape, **options: int) -> NetworkSpec:
    """Look up an architecture by name and build its spec.

    Args:
        name: Registry key, e.g. "desk-teacher".
        input_shape: (C, H, W) of the network input.
        **options: Factory keywords such as `classes` or `channels`.

    Raises:
        NetworkSpecError: If the name is unknown or the options do not fit.
    """
    try:
        factory = ARCHITECTURES[name]
    except KeyError:
        known = ", ".join(sorted(ARCHITECTURES))
        raise NetworkSpecError(f"Unknown architecture {name!r} (known: {known})") from None
    try:
        return factory(input_shape, **options)
    except TypeError as e:
        raise NetworkSpecError(f"{name}: {e}") from e
