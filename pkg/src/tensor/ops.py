"""Differentiable operators.

Every operator computes its forward value with numpy and records a backward
rule on the active tapes. Operators registered with `differentiable` form the
set covered by the gradient-check suite.
"""

from collections.abc import Callable
from typing import Any, TypeVar

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.tensor.geometry import ConvGeometry, GeometryError, output_extent
from src.tensor.tensor import ShapeError, Tensor, TensorError, record

F = TypeVar("F", bound=Callable[..., Tensor])

DIFFERENTIABLE_OPS: dict[str, Callable[..., Tensor]] = {}


def differentiable(name: str) -> Callable[[F], F]:
    """Register an operator under a name for gradient-check coverage."""

    def decorator(fn: F) -> F:
        DIFFERENTIABLE_OPS[name] = fn
        return fn

    return decorator


def _emit(op: str, data: np.ndarray, inputs: tuple[Tensor, ...], rule: Any) -> Tensor:
    data = np.asarray(data)
    if not data.flags.c_contiguous:
        data = data.copy()
    out = Tensor.wrap(data, op)
    record(op, inputs, out, rule)
    return out


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# Elementwise arithmetic


@differentiable("add")
def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two equally shaped tensors."""
    _require_same_shape("add", a, b)
    return _emit("add", a.data + b.data, (a, b), lambda g: (g, g))


@differentiable("sub")
def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference of two equally shaped tensors."""
    _require_same_shape("sub", a, b)
    return _emit("sub", a.data - b.data, (a, b), lambda g: (g, -g))


@differentiable("mul")
def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two equally shaped tensors."""
    _require_same_shape("mul", a, b)
    a_data, b_data = a.data, b.data
    return _emit("mul", a_data * b_data, (a, b), lambda g: (g * b_data, g * a_data))


@differentiable("affine")
def affine(x: Tensor, scale: float, shift: float = 0.0) -> Tensor:
    """Compute scale * x + shift for scalar constants."""
    data = x.data * x.dtype.type(scale) + x.dtype.type(shift)
    factor = x.dtype.type(scale)
    return _emit("affine", data, (x,), lambda g: (g * factor,))


@differentiable("log")
def log(x: Tensor) -> Tensor:
    """Natural logarithm."""
    x_data = x.data
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(x_data)
    return _emit("log", data, (x,), lambda g: (g / x_data,))


@differentiable("clip")
def clip(x: Tensor, low: float, high: float) -> Tensor:
    """Clamp values to [low, high]; gradient passes where low <= x <= high."""
    if low > high:
        raise TensorError(f"clip: low {low} exceeds high {high}")
    x_data = x.data
    mask = (x_data >= low) & (x_data <= high)
    return _emit("clip", np.clip(x_data, low, high), (x,), lambda g: (g * mask,))


# Reductions and reshaping


@differentiable("sum")
def sum(x: Tensor) -> Tensor:  # noqa: A001
    """Sum of all elements as a scalar tensor."""
    shape = x.shape
    return _emit(
        "sum",
        np.asarray(x.data.sum(), dtype=x.dtype),
        (x,),
        lambda g: (np.broadcast_to(g, shape).copy(),),
    )


@differentiable("mean")
def mean(x: Tensor) -> Tensor:
    """Mean of all elements as a scalar tensor."""
    shape = x.shape
    count = x.size
    return _emit(
        "mean",
        np.asarray(x.data.mean(), dtype=x.dtype),
        (x,),
        lambda g: (np.broadcast_to(g / count, shape).astype(g.dtype),),
    )


@differentiable("reshape")
def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Reshape without changing element order."""
    original = x.shape
    try:
        data = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot view {original} as {shape}") from e
    return _emit("reshape", data, (x,), lambda g: (g.reshape(original),))


@differentiable("flatten")
def flatten(x: Tensor) -> Tensor:
    """Collapse all axes after the batch axis."""
    if x.ndim < 2:
        raise ShapeError(f"flatten: needs a batch axis, got shape {x.shape}")
    original = x.shape
    data = x.data.reshape(original[0], -1)
    return _emit("flatten", data, (x,), lambda g: (g.reshape(original),))


@differentiable("pick")
def pick(x: Tensor, index: np.ndarray) -> Tensor:
    """Select one column per row: out[n] = x[n, index[n]]."""
    if x.ndim != 2:
        raise ShapeError(f"pick: needs a 2-D input, got shape {x.shape}")
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (x.shape[0],):
        raise ShapeError(f"pick: index shape {index.shape} does not match rows {x.shape[0]}")
    if index.min() < 0 or index.max() >= x.shape[1]:
        raise TensorError(f"pick: index outside [0, {x.shape[1]})")
    rows = np.arange(x.shape[0])
    shape = x.shape

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(shape, dtype=g.dtype)
        grad[rows, index] = g
        return (grad,)

    return _emit("pick", x.data[rows, index], (x,), rule)


# Activations


@differentiable("relu")
def relu(x: Tensor) -> Tensor:
    """Rectified linear unit."""
    mask = x.data > 0
    return _emit("relu", np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


@differentiable("sigmoid")
def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, evaluated without overflow for large |x|."""
    x_data = x.data
    positive = x_data >= 0
    exp_neg = np.exp(-np.abs(x_data))
    out = np.where(positive, 1.0 / (1.0 + exp_neg), exp_neg / (1.0 + exp_neg)).astype(x.dtype)
    return _emit("sigmoid", out, (x,), lambda g: (g * out * (1 - out),))


@differentiable("softmax")
def softmax(x: Tensor) -> Tensor:
    """Softmax along the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=-1, keepdims=True)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _emit("softmax", out, (x,), rule)


@differentiable("log_softmax")
def log_softmax(x: Tensor) -> Tensor:
    """Log-softmax along the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - log_norm
    probs = np.exp(out)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _emit("log_softmax", out, (x,), rule)


# Layers


@differentiable("dense")
def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map x @ weights + bias.

    Args:
        x: Input of shape [N, F].
        weights: Matrix of shape [F, O].
        bias: Vector of shape [O].

    Returns:
        Tensor of shape [N, O].
    """
    if x.ndim != 2 or weights.ndim != 2 or bias.ndim != 1:
        raise ShapeError(
            f"dense: expected [N,F], [F,O], [O], got {x.shape}, {weights.shape}, {bias.shape}"
        )
    if x.shape[1] != weights.shape[0] or weights.shape[1] != bias.shape[0]:
        raise ShapeError(
            f"dense: inner extents do not match: {x.shape} @ {weights.shape} + {bias.shape}"
        )
    x_data, w_data = x.data, weights.data

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (g @ w_data.T, x_data.T @ g, g.sum(axis=0))

    return _emit("dense", x_data @ w_data + bias.data, (x, weights, bias), rule)


def _conv_windows(padded: np.ndarray, geom: ConvGeometry) -> np.ndarray:
    """Strided (N, C, H', W', k_h, k_w) window view of a padded input."""
    windows = sliding_window_view(padded, (geom.kernel_h, geom.kernel_w), axis=(2, 3))
    return windows[:, :, :: geom.stride_h, :: geom.stride_w]


@differentiable("conv2d")
def conv2d(x: Tensor, filters: Tensor, bias: Tensor, geom: ConvGeometry) -> Tensor:
    """Multi-channel 2-D cross-correlation with zero padding.

    out[n, o, y, x] = bias[o] + sum over (i_y, i_x, c) of
        padded[n, c, y*s_h + i_y, x*s_w + i_x] * filters[o, c, i_y, i_x]

    Args:
        x: Input of shape [N, C, H, W].
        filters: Filter bank of shape [O, C, k_h, k_w].
        bias: Vector of shape [O].
        geom: Convolution geometry.

    Returns:
        Tensor of shape [N, O, H', W'].

    Raises:
        ShapeError: If operand shapes disagree with the geometry.
        GeometryError: If an output extent is not a positive integer.
    """
    if x.ndim != 4:
        raise ShapeError(f"conv2d: expected [N,C,H,W] input, got {x.shape}")
    if filters.shape != geom.filter_shape:
        raise ShapeError(f"conv2d: filter shape {filters.shape} != geometry {geom.filter_shape}")
    if x.shape[1] != geom.in_channels:
        raise ShapeError(
            f"conv2d: input has {x.shape[1]} channels, filters expect {geom.in_channels}"
        )
    if bias.shape != (geom.out_channels,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} != ({geom.out_channels},)")

    n, _, height, width = x.shape
    out_h, out_w = geom.output_hw(height, width)
    ph, pw = geom.padding_h, geom.padding_w
    padded = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    windows = _conv_windows(padded, geom)
    w_data = filters.data

    out = np.tensordot(windows, w_data, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + bias.data[None, :, None, None]

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        grad_filters = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = g.sum(axis=(0, 2, 3))
        cols = np.tensordot(g, w_data, axes=([1], [0]))  # N, H', W', C, k_h, k_w
        grad_padded = np.zeros(padded.shape, dtype=g.dtype)
        h_stop = geom.stride_h * (out_h - 1) + 1
        w_stop = geom.stride_w * (out_w - 1) + 1
        for i in range(geom.kernel_h):
            for j in range(geom.kernel_w):
                grad_padded[
                    :, :, i : i + h_stop : geom.stride_h, j : j + w_stop : geom.stride_w
                ] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, ph : ph + height, pw : pw + width]
        return (grad_x, grad_filters, grad_bias)

    assert out.shape == (n, geom.out_channels, out_h, out_w)
    return _emit("conv2d", out, (x, filters, bias), rule)


@differentiable("max_pool2d")
def max_pool2d(x: Tensor, size: int, stride: int | None = None) -> Tensor:
    """Max pooling over square windows.

    The gradient is routed to the arg-max of each window; ties go to the
    lowest flat index within the window.

    Args:
        x: Input of shape [N, C, H, W].
        size: Window extent.
        stride: Window step, defaults to `size`.

    Raises:
        GeometryError: If the window is empty or does not tile the input.
    """
    if x.ndim != 4:
        raise ShapeError(f"max_pool2d: expected [N,C,H,W] input, got {x.shape}")
    stride = size if stride is None else stride
    if size < 1:
        raise GeometryError(f"max_pool2d: empty pooling window (size={size})")
    n, c, height, width = x.shape
    out_h = output_extent(height, size, stride, 0)
    out_w = output_extent(width, size, stride, 0)

    windows = sliding_window_view(x.data, (size, size), axis=(2, 3))[:, :, ::stride, ::stride]
    flat = windows.reshape(n, c, out_h, out_w, size * size)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros((n, c, height, width), dtype=g.dtype)
        n_idx, c_idx, h_idx, w_idx = np.indices((n, c, out_h, out_w))
        rows = h_idx * stride + arg // size
        cols = w_idx * stride + arg % size
        np.add.at(grad, (n_idx, c_idx, rows, cols), g)
        return (grad,)

    return _emit("max_pool2d", out, (x,), rule)
