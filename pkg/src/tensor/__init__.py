"""Shape-checked tensors with reverse-mode automatic differentiation."""

from src.tensor.geometry import ConvGeometry, GeometryError, output_extent
from src.tensor.tensor import (
    GradientError,
    GradientMap,
    GradTape,
    NonFiniteError,
    ShapeError,
    Tensor,
    TensorError,
    backward,
    no_grad,
    per_op_finite_checks,
)

__all__ = [
    "ConvGeometry",
    "GeometryError",
    "GradTape",
    "GradientError",
    "GradientMap",
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "TensorError",
    "backward",
    "no_grad",
    "output_extent",
    "per_op_finite_checks",
]
