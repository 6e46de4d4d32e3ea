"""Tensor values and the reverse-mode gradient tape."""

from collections.abc import Callable, Iterable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any

import numpy as np

BackwardRule = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]

_PRECISIONS = {np.dtype(np.float32): "single", np.dtype(np.float64): "double"}
_DTYPES = {"single": np.float32, "double": np.float64}

_active_tapes: list["GradTape"] = []
_suspended = 0
_finite_checks = True


class TensorError(Exception):
    """Base error for tensor operations."""

    pass


class ShapeError(TensorError):
    """Raised when operand shapes are incompatible."""

    pass


class NonFiniteError(TensorError):
    """Raised when an operation produces NaN or Inf."""

    pass


class GradientError(TensorError):
    """Raised when a backward pass cannot be performed."""

    pass


def dtype_for(precision: str) -> type[np.floating[Any]]:
    """Map a precision name ("single" or "double") to a numpy dtype."""
    try:
        return _DTYPES[precision]
    except KeyError:
        raise TensorError(f"Unknown precision: {precision!r}") from None


class Tensor:
    """Immutable N-dimensional real array.

    Wraps a read-only numpy array of single or double precision. Gradients are
    not stored on the tensor; they are produced by `backward` from a `GradTape`.
    """

    __slots__ = ("_data", "name", "__weakref__")

    def __init__(
        self,
        data: Any,
        dtype: Any = None,
        name: str | None = None,
    ) -> None:
        """Create a tensor from array-like data.

        Args:
            data: Array-like values. The data is copied.
            dtype: numpy dtype or precision name. Defaults to the input's float
                dtype when it is float32/float64, else float32.
            name: Optional label used in error messages.
        """
        if isinstance(dtype, str):
            dtype = dtype_for(dtype)
        if dtype is None:
            source = np.asarray(data)
            dtype = source.dtype if source.dtype in _PRECISIONS else np.float32
        array = np.array(data, dtype=dtype)
        self._data = _validated(array, name or "tensor")
        self.name = name

    @classmethod
    def wrap(cls, array: np.ndarray, origin: str = "tensor") -> "Tensor":
        """Wrap an array produced internally without copying it.

        Args:
            array: Freshly computed array owned by the caller.
            origin: Operation name used in error messages.

        Returns:
            Tensor viewing the array.
        """
        tensor = cls.__new__(cls)
        if array.dtype not in _PRECISIONS:
            array = array.astype(np.float32)
        tensor._data = _validated(array, origin)
        tensor.name = None
        return tensor

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        """Extents of each axis."""
        return tuple(self._data.shape)

    @property
    def ndim(self) -> int:
        """Number of axes."""
        return self._data.ndim

    @property
    def size(self) -> int:
        """Total element count."""
        return int(self._data.size)

    @property
    def dtype(self) -> np.dtype:
        """numpy dtype of the values."""
        return self._data.dtype

    @property
    def precision(self) -> str:
        """Either "single" or "double"."""
        return _PRECISIONS[self._data.dtype]

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        if self._data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self._data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the values."""
        return np.array(self._data)

    def detach(self) -> "Tensor":
        """Return a tensor with the same values and no tape history."""
        return Tensor.wrap(self._data, "detach")

    def astype(self, precision: str) -> "Tensor":
        """Return a copy converted to the given precision."""
        return Tensor(self._data, dtype=precision, name=self.name)

    def __add__(self, other: Any) -> "Tensor":
        from src.tensor import ops

        if isinstance(other, Tensor):
            return ops.add(self, other)
        return ops.affine(self, 1.0, float(other))

    def __radd__(self, other: Any) -> "Tensor":
        return self.__add__(other)

    def __sub__(self, other: Any) -> "Tensor":
        from src.tensor import ops

        if isinstance(other, Tensor):
            return ops.sub(self, other)
        return ops.affine(self, 1.0, -float(other))

    def __rsub__(self, other: Any) -> "Tensor":
        from src.tensor import ops

        return ops.affine(self, -1.0, float(other))

    def __mul__(self, other: Any) -> "Tensor":
        from src.tensor import ops

        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.affine(self, float(other), 0.0)

    def __rmul__(self, other: Any) -> "Tensor":
        return self.__mul__(other)

    def __truediv__(self, other: float) -> "Tensor":
        from src.tensor import ops

        return ops.affine(self, 1.0 / float(other), 0.0)

    def __neg__(self) -> "Tensor":
        from src.tensor import ops

        return ops.affine(self, -1.0, 0.0)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, precision={self.precision}{label})"


def _validated(array: np.ndarray, origin: str) -> np.ndarray:
    """Check extents and finiteness, then freeze the array."""
    if any(extent <= 0 for extent in array.shape):
        raise ShapeError(f"{origin}: extents must be positive, got {array.shape}")
    if _finite_checks and not np.isfinite(array).all():
        raise NonFiniteError(f"{origin}: produced NaN or Inf values")
    array.flags.writeable = False
    return array


@dataclass
class TapeNode:
    """One recorded operation."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardRule


class GradTape:
    """Append-only record of operations for reverse-mode differentiation.

    Usage:
        with GradTape() as tape:
            tape.watch(weight)
            loss = ...
        grads = backward(loss, tape)
    """

    def __init__(self) -> None:
        """Initialize an empty tape."""
        self.nodes: list[TapeNode] = []
        self._leaves: dict[int, Tensor] = {}
        self._tracked: set[int] = set()

    def watch(self, *tensors: Tensor) -> None:
        """Register tensors as leaves that receive gradients.

        Args:
            *tensors: Leaf tensors (typically parameters).
        """
        for tensor in tensors:
            self._leaves[id(tensor)] = tensor
            self._tracked.add(id(tensor))

    def watch_all(self, tensors: Iterable[Tensor]) -> None:
        """Register every tensor of an iterable as a leaf."""
        self.watch(*tensors)

    @property
    def leaves(self) -> list[Tensor]:
        """Leaf tensors in registration order."""
        return list(self._leaves.values())

    def is_tracked(self, tensor: Tensor) -> bool:
        """Check whether a tensor is a leaf or depends on one."""
        return id(tensor) in self._tracked

    def record(
        self,
        op: str,
        inputs: tuple[Tensor, ...],
        output: Tensor,
        rule: BackwardRule,
    ) -> None:
        """Append a node if any operand depends on a leaf of this tape."""
        if any(id(tensor) in self._tracked for tensor in inputs):
            self.nodes.append(TapeNode(op, inputs, output, rule))
            self._tracked.add(id(output))

    def __enter__(self) -> "GradTape":
        _active_tapes.append(self)
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        _active_tapes.remove(self)


def record(op: str, inputs: tuple[Tensor, ...], output: Tensor, rule: BackwardRule) -> None:
    """Record an operation on every active tape unless recording is suspended."""
    if _suspended or not _active_tapes:
        return
    for tape in _active_tapes:
        tape.record(op, inputs, output, rule)


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording on all active tapes."""
    global _suspended
    _suspended += 1
    try:
        yield
    finally:
        _suspended -= 1


@contextmanager
def per_op_finite_checks(enabled: bool) -> Iterator[None]:
    """Enable or disable NaN/Inf detection after each operation."""
    global _finite_checks
    previous = _finite_checks
    _finite_checks = enabled
    try:
        yield
    finally:
        _finite_checks = previous


class GradientMap:
    """Gradients of a backward pass, keyed by leaf tensor identity."""

    def __init__(self, grads: dict[int, np.ndarray], leaves: list[Tensor]) -> None:
        self._grads = grads
        self._leaves = leaves

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        try:
            return self._grads[id(tensor)]
        except KeyError:
            raise GradientError(f"No gradient recorded for {tensor!r}") from None

    def __contains__(self, tensor: object) -> bool:
        return id(tensor) in self._grads

    def __len__(self) -> int:
        return len(self._grads)

    def by_name(self, named: dict[str, Tensor]) -> dict[str, np.ndarray]:
        """Select gradients for a name → tensor mapping.

        Args:
            named: Parameters keyed by name.

        Returns:
            Gradient arrays for the named tensors that are leaves of the pass.
        """
        return {name: self._grads[id(t)] for name, t in named.items() if id(t) in self._grads}


def backward(root: Tensor, tape: GradTape) -> GradientMap:
    """Run reverse-mode differentiation from a scalar root.

    Args:
        root: Single-element tensor, normally a loss.
        tape: Tape that recorded the computation of `root`.

    Returns:
        GradientMap with one gradient per leaf; leaves that do not influence
        the root receive zeros.

    Raises:
        GradientError: If the root is not scalar or not produced on the tape.
    """
    if root.size != 1:
        raise GradientError(f"backward() needs a scalar root, got shape {root.shape}")
    if not tape.is_tracked(root):
        raise GradientError("Root does not depend on any watched leaf of the tape")

    pending: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    leaf_ids = {id(leaf) for leaf in tape.leaves}

    for node in reversed(tape.nodes):
        key = id(node.output)
        grad_out = pending.get(key)
        if grad_out is None:
            continue
        if key not in leaf_ids:
            del pending[key]
        for operand, grad in zip(node.inputs, node.backward(grad_out)):
            if grad is None or not tape.is_tracked(operand):
                continue
            slot = id(operand)
            pending[slot] = pending[slot] + grad if slot in pending else grad

    grads: dict[int, np.ndarray] = {}
    for leaf in tape.leaves:
        grad = pending.get(id(leaf))
        if grad is None:
            grad = np.zeros_like(leaf.data)
        elif grad.shape != leaf.shape:
            raise GradientError(
                f"Gradient shape {grad.shape} does not match leaf shape {leaf.shape}"
            )
        grads[id(leaf)] = np.asarray(grad, dtype=leaf.dtype)
    return GradientMap(grads, tape.leaves)
