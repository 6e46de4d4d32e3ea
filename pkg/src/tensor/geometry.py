"""Convolution and pooling geometry."""

from dataclasses import dataclass
from typing import Any


class GeometryError(Exception):
    """Raised when a kernel/stride/padding combination has no valid output."""

    pass


def output_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    """Compute the output extent of one spatial axis.

    Args:
        size: Input extent along the axis.
        kernel: Kernel extent along the axis.
        stride: Stride along the axis.
        padding: Zero padding added on both sides of the axis.

    Returns:
        (size + 2*padding - kernel) / stride + 1.

    Raises:
        GeometryError: If the quotient is not a positive integer.
    """
    if kernel < 1 or stride < 1 or padding < 0:
        raise GeometryError(
            f"Invalid geometry: kernel={kernel}, stride={stride}, padding={padding}"
        )
    span = size + 2 * padding - kernel
    if span < 0:
        raise GeometryError(
            f"Kernel {kernel} exceeds padded extent {size + 2 * padding}"
        )
    if span % stride != 0:
        raise GeometryError(
            f"Non-integer output extent: ({size} + 2*{padding} - {kernel})/{stride} + 1"
        )
    return span // stride + 1


@dataclass(frozen=True)
class ConvGeometry:
    """Geometry of a 2-D convolution."""

    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride_h: int = 1
    stride_w: int = 1
    padding_h: int = 0
    padding_w: int = 0

    @classmethod
    def square(
        cls,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        padding: int = 0,
    ) -> "ConvGeometry":
        """Build a geometry with identical settings on both axes."""
        return cls(in_channels, out_channels, kernel, kernel, stride, stride, padding, padding)

    @property
    def filter_shape(self) -> tuple[int, int, int, int]:
        """Shape of the filter bank (O, C, k_h, k_w)."""
        return (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w)

    @property
    def fan_in(self) -> int:
        """Number of inputs feeding one output element."""
        return self.in_channels * self.kernel_h * self.kernel_w

    def output_hw(self, height: int, width: int) -> tuple[int, int]:
        """Output spatial extents for an input of the given size.

        Raises:
            GeometryError: If either axis has no valid integer extent.
        """
        return (
            output_extent(height, self.kernel_h, self.stride_h, self.padding_h),
            output_extent(width, self.kernel_w, self.stride_w, self.padding_w),
        )

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_h": self.kernel_h,
            "kernel_w": self.kernel_w,
            "stride_h": self.stride_h,
            "stride_w": self.stride_w,
            "padding_h": self.padding_h,
            "padding_w": self.padding_w,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ConvGeometry":
        """Create from dictionary."""
        return cls(**{key: int(value) for key, value in data.items()})
