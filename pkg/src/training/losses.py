"""Training objectives: cross-entropy, distillation, feature-map MSE and the adversarial pair."""

import math
from dataclasses import dataclass

import numpy as np

from src.tensor import ops
from src.tensor.gradcheck import GradCheckCase
from src.tensor.geometry import ConvGeometry
from src.tensor.tensor import Tensor

PROBABILITY_FLOOR = 1e-7

COMPONENTS = ("ce", "kd", "mse_fm", "adv_g", "adv_d", "total")


class LossError(Exception):
    """Raised when loss inputs are invalid."""

    pass


@dataclass(frozen=True)
class LossValue:
    """A scalar loss tensor tagged with the component it measures."""

    value: Tensor
    component: str

    def __post_init__(self) -> None:
        if self.component not in COMPONENTS:
            raise LossError(f"Unknown loss component: {self.component!r}")
        if self.value.size != 1:
            raise LossError(f"{self.component}: loss must be scalar, got {self.value.shape}")

    def item(self) -> float:
        """Loss value as a Python float."""
        return self.value.item()

    @property
    def is_finite(self) -> bool:
        """True unless the value is NaN or Inf."""
        return math.isfinite(self.item())


def _check_labels(labels: np.ndarray, rows: int, classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (rows,):
        raise LossError(f"Expected {rows} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise LossError(f"Labels must lie in [0, {classes}), got range [{labels.min()}, {labels.max()}]")
    return labels.astype(np.int64)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> LossValue:
    """Mean over the batch of -log_softmax(logits)[label].

    Args:
        logits: Tensor of shape [N, K].
        labels: Integer class indices of shape [N].

    Raises:
        LossError: On out-of-range labels.
    """
    if logits.ndim != 2:
        raise LossError(f"cross_entropy expects [N, K] logits, got {logits.shape}")
    labels = _check_labels(labels, logits.shape[0], logits.shape[1])
    picked = ops.pick(ops.log_softmax(logits), labels)
    return LossValue(ops.affine(ops.mean(picked), -1.0), "ce")


def soft_targets(logits: Tensor, temperature: float) -> np.ndarray:
    """softmax(logits / T) as a plain array."""
    if temperature <= 0:
        raise LossError(f"Temperature must be positive, got {temperature}")
    return ops.softmax(ops.affine(logits.detach(), 1.0 / temperature)).numpy()


def kd_loss(
    student_logits: Tensor,
    teacher_logits: Tensor,
    temperature: float,
    weight: float,
    labels: np.ndarray,
    t_squared: bool = True,
) -> LossValue:
    """Knowledge-distillation loss.

    weight * T^2 * CE(softmax(teacher / T), log_softmax(student / T))
    + (1 - weight) * cross_entropy(student, labels)

    Teacher logits are detached. A term with weight exactly zero is not
    computed, so weight 0 returns the plain cross-entropy tensor itself.

    Args:
        student_logits: Tensor of shape [N, K].
        teacher_logits: Tensor of shape [N, K].
        temperature: Softmax temperature T > 0.
        weight: Teacher weight in [0, 1].
        labels: Integer class indices of shape [N].
        t_squared: Scale the soft term by T^2.

    Raises:
        LossError: If T <= 0, the weight is outside [0, 1] or shapes differ.
    """
    if temperature <= 0:
        raise LossError(f"Temperature must be positive, got {temperature}")
    if not 0.0 <= weight <= 1.0:
        raise LossError(f"KD weight must lie in [0, 1], got {weight}")
    if student_logits.shape != teacher_logits.shape:
        raise LossError(
            f"Student logits {student_logits.shape} and teacher logits "
            f"{teacher_logits.shape} differ"
        )

    hard = cross_entropy(student_logits, labels).value if weight < 1.0 else None
    if weight == 0.0:
        assert hard is not None
        return LossValue(hard, "kd")

    targets = Tensor(soft_targets(teacher_logits, temperature), dtype=student_logits.dtype)
    log_probs = ops.log_softmax(ops.affine(student_logits, 1.0 / temperature))
    rows = student_logits.shape[0]
    scale = weight * (temperature**2 if t_squared else 1.0)
    soft = ops.affine(ops.sum(ops.mul(targets, log_probs)), -scale / rows)
    if hard is None:
        return LossValue(soft, "kd")
    return LossValue(ops.add(soft, ops.affine(hard, 1.0 - weight)), "kd")


def mse_feature_loss(m_t: Tensor, m_s: Tensor) -> LossValue:
    """Mean squared difference between a regressed teacher map and a student map.

    The teacher map is detached; only `m_s` receives gradient.

    Raises:
        LossError: If the shapes differ, which means the regressor is mis-sized.
    """
    if m_t.shape != m_s.shape:
        raise LossError(
            f"Feature maps differ in shape: teacher {m_t.shape} vs student {m_s.shape}"
        )
    diff = ops.sub(m_s, m_t.detach())
    return LossValue(ops.mean(ops.mul(diff, diff)), "mse_fm")


def _clamped(probabilities: Tensor, role: str) -> Tensor:
    data = probabilities.data
    if data.min() < 0.0 or data.max() > 1.0:
        raise LossError(f"{role} probabilities must lie in [0, 1]")
    return ops.clip(probabilities, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)


def discriminator_loss(d_teacher: Tensor, d_student: Tensor) -> LossValue:
    """Binary cross-entropy with teacher maps labelled 1 and student maps 0.

    mean(-log d_teacher - log(1 - d_student)), probabilities clamped to
    [1e-7, 1 - 1e-7].
    """
    if d_teacher.shape != d_student.shape:
        raise LossError(
            f"Discriminator outputs differ in shape: {d_teacher.shape} vs {d_student.shape}"
        )
    real = ops.log(_clamped(d_teacher, "teacher"))
    fake = ops.log(ops.affine(_clamped(d_student, "student"), -1.0, 1.0))
    return LossValue(ops.affine(ops.mean(ops.add(real, fake)), -1.0), "adv_d")


def generator_adversarial_loss(d_student: Tensor) -> LossValue:
    """Non-saturating generator loss mean(-log d_student)."""
    picked = ops.log(_clamped(d_student, "student"))
    return LossValue(ops.affine(ops.mean(picked), -1.0), "adv_g")


def student_total_loss(
    ce: LossValue,
    adv_g: LossValue | None,
    mse_fm: LossValue | None,
    alpha: float,
    beta: float,
) -> LossValue:
    """ce + alpha * adv_g + beta * mse_fm.

    Terms with a zero weight (or absent) are skipped, so alpha = beta = 0
    yields the ce tensor itself.

    Raises:
        LossError: On negative weights or a missing term with non-zero weight.
    """
    if alpha < 0 or beta < 0:
        raise LossError(f"Loss weights must be non-negative, got alpha={alpha}, beta={beta}")
    total = ce.value
    for term, weight, name in ((adv_g, alpha, "adv_g"), (mse_fm, beta, "mse_fm")):
        if weight == 0.0:
            continue
        if term is None:
            raise LossError(f"{name} has weight {weight} but was not computed")
        total = ops.add(total, ops.affine(term.value, weight))
    return LossValue(total, "total")


def loss_gradcheck_cases(seed: int = 0) -> list[GradCheckCase]:
    """Gradient-check cases for every loss, in double precision."""
    rng = np.random.default_rng(seed)

    def double(values: np.ndarray) -> Tensor:
        return Tensor(values, dtype="double")

    labels = rng.integers(0, 3, size=4)
    logits = double(rng.standard_normal((4, 3)))
    teacher = double(rng.standard_normal((4, 3)))
    m_t = double(rng.standard_normal((2, 3, 2, 2)))
    m_s = double(rng.standard_normal((2, 3, 2, 2)))
    d_t = double(rng.uniform(0.1, 0.9, (5, 1)))
    d_s = double(rng.uniform(0.1, 0.9, (5, 1)))

    geom = ConvGeometry.square(3, 2, kernel=3, padding=1)
    d_filters = double(rng.standard_normal(geom.filter_shape) * 0.3)
    d_bias = double(np.zeros(2))
    d_weights = double(rng.standard_normal((2 * 2 * 2, 1)) * 0.3)
    d_out_bias = double(np.zeros(1))

    def through_discriminator(fm: Tensor) -> Tensor:
        hidden = ops.conv2d(fm, d_filters, d_bias, geom)
        prob = ops.sigmoid(ops.dense(ops.flatten(hidden), d_weights, d_out_bias))
        return generator_adversarial_loss(prob).value

    def ce_fn(x: Tensor) -> Tensor:
        return cross_entropy(x, labels).value

    def kd_fn(x: Tensor) -> Tensor:
        return kd_loss(x, teacher, 4.0, 0.9, labels).value

    def mse_fn(x: Tensor) -> Tensor:
        return mse_feature_loss(m_t, x).value

    def adv_d_fn(a: Tensor, b: Tensor) -> Tensor:
        return discriminator_loss(a, b).value

    def adv_g_fn(x: Tensor) -> Tensor:
        return generator_adversarial_loss(x).value

    def total_fn(x: Tensor, fm: Tensor) -> Tensor:
        ce = cross_entropy(x, labels)
        adv = LossValue(through_discriminator(fm), "adv_g")
        return student_total_loss(ce, adv, mse_feature_loss(m_t, fm), 0.6, 0.5).value

    return [
        GradCheckCase("loss:ce", ce_fn, [logits]),
        GradCheckCase("loss:kd", kd_fn, [logits]),
        GradCheckCase("loss:mse_fm", mse_fn, [m_s]),
        GradCheckCase("loss:adv_d", adv_d_fn, [d_t, d_s]),
        GradCheckCase("loss:adv_g", adv_g_fn, [d_s]),
        GradCheckCase("loss:adv_g_through_discriminator", through_discriminator, [m_s]),
        GradCheckCase("loss:student_total", total_fn, [logits, m_s]),
    ]
