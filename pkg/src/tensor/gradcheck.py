"""Finite-difference gradient verification."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from src.tensor import ops
from src.tensor.geometry import ConvGeometry
from src.tensor.tensor import GradTape, Tensor, backward, no_grad

ScalarFn = Callable[..., Tensor]

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-4
DENOMINATOR_FLOOR = 1e-8


def finite_difference_grad(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Estimate df/dx by central differences.

    Args:
        f: Function mapping a tensor shaped like `x` to a scalar tensor.
        x: Point of evaluation.
        eps: Half step of the central difference.

    Returns:
        Array shaped like `x` holding (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    base = x.numpy()
    grad = np.zeros_like(base)
    with no_grad():
        for index in np.ndindex(base.shape):
            original = base[index]
            base[index] = original + eps
            upper = f(Tensor(base, dtype=x.dtype)).item()
            base[index] = original - eps
            lower = f(Tensor(base, dtype=x.dtype)).item()
            base[index] = original
            grad[index] = (upper - lower) / (2 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest elementwise |a - n| / max(|a|, |n|, 1e-8)."""
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOMINATOR_FLOOR)
    return float((np.abs(analytic - numeric) / scale).max())


def max_gradient_error(fn: ScalarFn, inputs: Sequence[Tensor], eps: float = DEFAULT_EPS) -> float:
    """Compare analytic and numeric gradients of `fn` w.r.t. every input.

    Args:
        fn: Function of the input tensors returning a scalar tensor.
        inputs: Differentiation points, normally double precision.
        eps: Finite-difference step.

    Returns:
        Largest relative error over all inputs.
    """
    with GradTape() as tape:
        tape.watch(*inputs)
        root = fn(*inputs)
    grads = backward(root, tape)

    worst = 0.0
    for position, point in enumerate(inputs):

        def partial(x: Tensor, position: int = position) -> Tensor:
            args = list(inputs)
            args[position] = x
            return fn(*args)

        numeric = finite_difference_grad(partial, point, eps)
        worst = max(worst, relative_error(grads[point], numeric))
    return worst


@dataclass
class GradCheckCase:
    """One entry of the gradient-check suite."""

    name: str
    fn: ScalarFn
    inputs: list[Tensor]


@dataclass
class GradCheckResult:
    """Outcome of one gradient-check case."""

    name: str
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        """True when the error is within tolerance."""
        return self.max_relative_error < self.tolerance


def run_gradcheck(
    cases: Sequence[GradCheckCase],
    eps: float = DEFAULT_EPS,
    tolerance: float = DEFAULT_TOLERANCE,
) -> list[GradCheckResult]:
    """Evaluate every case and report its maximum relative error."""
    return [
        GradCheckResult(case.name, max_gradient_error(case.fn, case.inputs, eps), tolerance)
        for case in cases
    ]


def _projection(shape: tuple[int, ...], rng: np.random.Generator) -> Tensor:
    """Fixed random weights that turn a tensor output into a scalar loss."""
    return Tensor(rng.standard_normal(shape), dtype="double")


def _weighted_sum(out: Tensor, weights: Tensor) -> Tensor:
    return ops.sum(ops.mul(out, weights))


def _away_from_zero(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Random values with |v| >= 0.1, clear of activation kinks."""
    signs = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return signs * (0.1 + rng.random(shape))


def operator_cases(seed: int = 0) -> list[GradCheckCase]:
    """Gradient-check cases, one per registered differentiable operator.

    Inputs are double precision and chosen clear of non-differentiable points.
    """
    rng = np.random.default_rng(seed)

    def double(values: np.ndarray) -> Tensor:
        return Tensor(values, dtype="double")

    def normal(*shape: int) -> Tensor:
        return double(rng.standard_normal(shape))

    def unary(op: Callable[[Tensor], Tensor], x: Tensor) -> ScalarFn:
        weights = _projection(op(x).shape, rng)
        return lambda a: _weighted_sum(op(a), weights)

    labels = rng.integers(0, 4, size=3)
    conv_geom = ConvGeometry.square(2, 3, kernel=3, stride=2, padding=1)
    pool_values = double(rng.permutation(2 * 2 * 4 * 4).reshape(2, 2, 4, 4) * 0.1)

    cases = {
        "add": ([normal(3, 4), normal(3, 4)], None),
        "sub": ([normal(3, 4), normal(3, 4)], None),
        "mul": ([normal(3, 4), normal(3, 4)], None),
        "affine": ([normal(3, 4)], lambda a: ops.affine(a, -1.7, 0.3)),
        "log": ([double(0.5 + rng.random((3, 4)))], ops.log),
        "clip": ([double(rng.uniform(-0.9, 0.9, (3, 4)))], lambda a: ops.clip(a, -1.0, 1.0)),
        "sum": ([normal(3, 4)], lambda a: ops.mul(ops.sum(a), ops.sum(a))),
        "mean": ([normal(3, 4)], lambda a: ops.mul(ops.mean(a), ops.mean(a))),
        "reshape": ([normal(2, 6)], lambda a: ops.reshape(a, (3, 4))),
        "flatten": ([normal(2, 2, 3)], ops.flatten),
        "pick": ([normal(3, 4)], lambda a: ops.pick(a, labels)),
        "relu": ([double(_away_from_zero(rng, (3, 4)))], ops.relu),
        "sigmoid": ([normal(3, 4)], ops.sigmoid),
        "softmax": ([normal(3, 4)], ops.softmax),
        "log_softmax": ([normal(3, 4)], ops.log_softmax),
        "dense": ([normal(3, 4), normal(4, 2), normal(2)], None),
        "conv2d": ([normal(2, 2, 5, 5), normal(3, 2, 3, 3), normal(3)], None),
        "max_pool2d": ([pool_values], lambda a: ops.max_pool2d(a, 2)),
    }

    def projected(op: ScalarFn, out_shape: tuple[int, ...]) -> ScalarFn:
        weights = _projection(out_shape, rng)

        def fn(*args: Tensor) -> Tensor:
            return _weighted_sum(op(*args), weights)

        return fn

    def conv(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
        return ops.conv2d(x, w, b, conv_geom)

    result: list[GradCheckCase] = []
    for name, (inputs, op) in cases.items():
        fn: ScalarFn
        if name in ("add", "sub", "mul"):
            fn = projected(getattr(ops, name), inputs[0].shape)
        elif name == "dense":
            fn = projected(ops.dense, (3, 2))
        elif name == "conv2d":
            fn = projected(conv, (2, 3, 3, 3))
        elif op(inputs[0]).size == 1:
            fn = op
        else:
            fn = unary(op, inputs[0])
        result.append(GradCheckCase(name, fn, inputs))
    return result


def composite_case(seed: int = 0) -> GradCheckCase:
    """conv2d → relu → max_pool2d → flatten → dense → log_softmax → pick → mean."""
    rng = np.random.default_rng(seed)
    geom = ConvGeometry.square(2, 4, kernel=3, stride=1, padding=1)
    labels = np.array([1, 0])

    def network(x: Tensor, filters: Tensor, bias: Tensor, w: Tensor, b: Tensor) -> Tensor:
        hidden = ops.max_pool2d(ops.relu(ops.conv2d(x, filters, bias, geom)), 2)
        logits = ops.dense(ops.flatten(hidden), w, b)
        return ops.affine(ops.mean(ops.pick(ops.log_softmax(logits), labels)), -1.0)

    inputs = [
        Tensor(rng.standard_normal((2, 2, 4, 4)), dtype="double"),
        Tensor(rng.standard_normal((4, 2, 3, 3)) * 0.5, dtype="double"),
        Tensor(rng.standard_normal(4) * 0.1, dtype="double"),
        Tensor(rng.standard_normal((16, 3)) * 0.5, dtype="double"),
        Tensor(rng.standard_normal(3) * 0.1, dtype="double"),
    ]
    return GradCheckCase("composite", network, inputs)
