"""Teacher-to-student regressor: geometry solving and pre-training against labels.

A single convolution maps the teacher's last feature map (C_t, M_t) onto
the student's (C_l, M_l). Its kernel per axis follows from

    (M_t + 2P - K) / S + 1 = M_l   =>   K = M_t + 2P - S (M_l - 1)
"""

import time
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.data.dataset import Dataset
from src.models.records import MetricsRecord
from src.nn.architectures import build_architecture
from src.nn.layers import NetworkSpec
from src.nn.network import NetworkState, forward_classifier, forward_generator, init_network
from src.nn.optim import OptimizerState, sgd_step
from src.tensor import ops
from src.tensor.geometry import ConvGeometry, GeometryError
from src.tensor.tensor import GradTape, ShapeError, Tensor, backward, dtype_for, no_grad
from src.training.losses import cross_entropy
from src.training.schedule import BatchStream
from src.utils.logging import MetricsLogger, logger

Shape = tuple[int, int, int]


class RegressorGeometryError(GeometryError):
    """Raised when no kernel maps the teacher map onto the student map."""

    pass


def _pair(value: int | tuple[int, int]) -> tuple[int, int]:
    if isinstance(value, tuple):
        return (int(value[0]), int(value[1]))
    return (int(value), int(value))


@dataclass(frozen=True)
class RegressorSpec:
    """Solved geometry of the teacher-to-student convolution."""

    teacher_shape: Shape
    student_shape: Shape
    stride: tuple[int, int]
    padding: tuple[int, int]
    kernel: tuple[int, int]

    @property
    def geometry(self) -> ConvGeometry:
        """Convolution geometry C_t -> C_l."""
        return ConvGeometry(
            in_channels=self.teacher_shape[0],
            out_channels=self.student_shape[0],
            kernel_h=self.kernel[0],
            kernel_w=self.kernel[1],
            stride_h=self.stride[0],
            stride_w=self.stride[1],
            padding_h=self.padding[0],
            padding_w=self.padding[1],
        )

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "teacher_shape": list(self.teacher_shape),
            "student_shape": list(self.student_shape),
            "stride": list(self.stride),
            "padding": list(self.padding),
            "kernel": list(self.kernel),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RegressorSpec":
        """Create from dictionary."""
        t, s = data["teacher_shape"], data["student_shape"]
        return cls(
            teacher_shape=(int(t[0]), int(t[1]), int(t[2])),
            student_shape=(int(s[0]), int(s[1]), int(s[2])),
            stride=_pair(tuple(data["stride"])),
            padding=_pair(tuple(data["padding"])),
            kernel=_pair(tuple(data["kernel"])),
        )


def solve_regressor_geometry(
    teacher_shape: Shape,
    student_shape: Shape,
    stride: int | tuple[int, int] = 1,
    padding: int | tuple[int, int] = 0,
) -> RegressorSpec:
    """Solve the kernel size that maps teacher maps onto student maps.

    Args:
        teacher_shape: (C_t, M_th, M_tw).
        student_shape: (C_l, M_lh, M_lw).
        stride: S per axis (int or (S_h, S_w)).
        padding: P per axis (int or (P_h, P_w)).

    Returns:
        RegressorSpec whose geometry turns teacher-shaped maps into
        student-shaped ones exactly.

    Raises:
        RegressorGeometryError: If an extent is not positive, or the solved
            kernel is smaller than 1.
    """
    strides, paddings = _pair(stride), _pair(padding)
    shapes = f"teacher {tuple(teacher_shape)} -> student {tuple(student_shape)}"
    if any(v < 1 for v in (*teacher_shape, *student_shape)):
        raise RegressorGeometryError(f"Extents must be positive: {shapes}")
    if any(s < 1 for s in strides) or any(p < 0 for p in paddings):
        raise RegressorGeometryError(
            f"Invalid stride {strides} or padding {paddings} for {shapes}"
        )

    kernel = []
    for axis in range(2):
        m_t, m_l = teacher_shape[1 + axis], student_shape[1 + axis]
        s, p = strides[axis], paddings[axis]
        k = m_t + 2 * p - s * (m_l - 1)
        if k < 1 or k > m_t + 2 * p:
            raise RegressorGeometryError(
                f"No valid kernel for {shapes} with stride {s}, padding {p} (K = {k})"
            )
        if (m_t + 2 * p - k) % s != 0 or (m_t + 2 * p - k) // s + 1 != m_l:
            raise RegressorGeometryError(f"Kernel {k} does not reproduce {shapes}")
        kernel.append(k)

    return RegressorSpec(
        teacher_shape=tuple(teacher_shape),  # type: ignore[arg-type]
        student_shape=tuple(student_shape),  # type: ignore[arg-type]
        stride=strides,
        padding=paddings,
        kernel=(kernel[0], kernel[1]),
    )


@dataclass
class RegressorState:
    """Regressor weights w_r and whether they have been trained."""

    weight: Tensor
    bias: Tensor
    trained: bool = False

    @property
    def parameters(self) -> dict[str, Tensor]:
        """Parameters keyed by name."""
        return {"weight": self.weight, "bias": self.bias}


def init_regressor(
    spec: RegressorSpec,
    seed: int | np.random.Generator,
    precision: str = "single",
) -> RegressorState:
    """Fan-in scaled Gaussian weights and zero bias."""
    rng = np.random.default_rng(seed)
    geom = spec.geometry
    dtype = dtype_for(precision)
    weight = rng.standard_normal(geom.filter_shape) * np.sqrt(2.0 / geom.fan_in)
    return RegressorState(
        weight=Tensor(weight, dtype=dtype, name="regressor.weight"),
        bias=Tensor(np.zeros(geom.out_channels), dtype=dtype, name="regressor.bias"),
    )


def apply_regressor(state: RegressorState, spec: RegressorSpec, m_t: Tensor) -> Tensor:
    """Map teacher feature maps onto the student feature-map shape.

    Raises:
        ShapeError: If `m_t` is not teacher-shaped.
    """
    if m_t.ndim != 4 or m_t.shape[1:] != spec.teacher_shape:
        raise ShapeError(
            f"Regressor expects teacher maps of shape {spec.teacher_shape}, got {m_t.shape[1:]}"
        )
    return ops.conv2d(m_t, state.weight, state.bias, spec.geometry)


def regressor_head(
    teacher_spec: NetworkSpec,
    reg_spec: RegressorSpec,
    classes: int,
    seed: int | np.random.Generator,
    precision: str = "single",
) -> tuple[NetworkSpec, NetworkState, bool]:
    """Classifier used to train the regressor.

    The teacher's own classifier is used (frozen) when it accepts
    student-shaped maps; otherwise a fresh single dense layer is built.

    Returns:
        (spec, state, is_auxiliary).
    """
    if tuple(teacher_spec.feature_shape) == reg_spec.student_shape:
        return teacher_spec, NetworkState({}), False
    head = build_architecture("aux-head", reg_spec.student_shape, classes=classes)
    return head, init_network(head, seed, precision), True


def train_regressor(
    teacher_spec: NetworkSpec,
    teacher_state: NetworkState,
    reg_spec: RegressorSpec,
    reg_state: RegressorState,
    data: Dataset,
    steps: int,
    opt: OptimizerState,
    batch_size: int = 32,
    seed: int = 0,
    head_seed: int | np.random.Generator | None = None,
    metrics: MetricsLogger | None = None,
) -> RegressorState:
    """Train w_r by cross-entropy through a classifier.

    The teacher generator (and classifier, when reused) stays frozen; only
    the regressor and, when shapes differ, an auxiliary head are updated.
    The head is discarded afterwards.

    Args:
        teacher_spec: Teacher architecture.
        teacher_state: Pretrained teacher parameters, never modified.
        reg_spec: Solved regressor geometry.
        reg_state: Initial regressor weights.
        data: Training split.
        steps: Number of update steps k.
        opt: Optimizer for the regressor (and auxiliary head).
        batch_size: Mini-batch size.
        seed: Batch-order seed.
        head_seed: Seed of the auxiliary head initializer.
        metrics: Receives one "regressor" record per step.

    Returns:
        New RegressorState with the trained flag set.

    Raises:
        ShapeError: If the teacher's feature maps do not match the regressor input.
    """
    if tuple(teacher_spec.feature_shape) != reg_spec.teacher_shape:
        raise ShapeError(
            f"Teacher maps {teacher_spec.feature_shape} do not match regressor input "
            f"{reg_spec.teacher_shape}"
        )
    precision = reg_state.weight.precision
    head_spec, head_state, auxiliary = regressor_head(
        teacher_spec,
        reg_spec,
        data.class_count,
        head_seed if head_seed is not None else seed,
        precision,
    )
    logger.info(
        f"Training regressor: kernel {reg_spec.kernel[0]}x{reg_spec.kernel[1]}, "
        f"{'auxiliary head' if auxiliary else 'teacher classifier'}, {steps} steps"
    )
    if metrics:
        metrics.log_phase_start("regressor", steps)
    started = time.perf_counter()

    head_opt = OptimizerState(opt.learning_rate, opt.momentum, opt.weight_decay)
    stream = BatchStream(data, batch_size, seed, precision=precision)
    for step in stream.take(steps):
        tick = time.perf_counter()
        with no_grad():
            m_t = forward_generator(teacher_state, teacher_spec, step.images)
        with GradTape() as tape:
            tape.watch(reg_state.weight, reg_state.bias)
            if auxiliary:
                tape.watch_all(head_state.parameters.values())
            logits = forward_classifier(
                head_state if auxiliary else teacher_state,
                head_spec,
                apply_regressor(reg_state, reg_spec, m_t),
            )
            loss = cross_entropy(logits, step.labels)
        grads = backward(loss.value, tape)

        reg = NetworkState(dict(reg_state.parameters))
        reg = sgd_step(reg, grads.by_name(reg.parameters), opt)
        reg_state = RegressorState(reg.parameters["weight"], reg.parameters["bias"])
        if auxiliary:
            head_state = sgd_step(head_state, grads.by_name(head_state.parameters), head_opt)

        if metrics:
            metrics.log_record(
                MetricsRecord(
                    phase="regressor",
                    iteration=step.index,
                    epoch=step.epoch,
                    losses={"ce": loss.item()},
                    learning_rate=opt.learning_rate,
                    wall_clock=time.perf_counter() - tick,
                )
            )

    if metrics:
        metrics.log_phase_complete("regressor", steps, time.perf_counter() - started)
    return RegressorState(reg_state.weight, reg_state.bias, trained=True)
