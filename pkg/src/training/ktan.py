"""Student updates: label/transfer pretraining and the adversarial loop.

One adversarial iteration runs three updates in order, each recomputing its
forward pass with the parameters left by the previous one:

1. discriminator D on teacher maps (label 1) vs. detached student maps (label 0);
2. student generator S on primary + alpha * adv_g + beta * mse_fm;
3. classifier C on the primary label loss alone.

The primary loss is cross-entropy, or the distillation loss for ktan_kd.
"""

import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from src.models.records import MetricsRecord
from src.nn.layers import NetworkSpec
from src.nn.network import (
    NetworkState,
    classifier_parameters,
    forward,
    forward_classifier,
    forward_generator,
    generator_parameters,
)
from src.nn.optim import OptimizerState, scheduled_learning_rate, sgd_step
from src.tensor.tensor import GradTape, NonFiniteError, Tensor, backward, no_grad
from src.training.config import TrainConfig
from src.training.losses import (
    LossValue,
    cross_entropy,
    discriminator_loss,
    generator_adversarial_loss,
    kd_loss,
    mse_feature_loss,
    student_total_loss,
)
from src.training.regressor import RegressorSpec, RegressorState, apply_regressor
from src.training.schedule import Step
from src.utils.logging import MetricsLogger


class TrainingAbortedError(Exception):
    """Raised when a loss becomes NaN or Inf."""

    def __init__(self, component: str, phase: str, iteration: int) -> None:
        self.component = component
        self.phase = phase
        self.iteration = iteration
        super().__init__(f"{component} loss is not finite ({phase} iteration {iteration})")


@dataclass
class Model:
    """A network specification with its current parameters."""

    spec: NetworkSpec
    state: NetworkState


@dataclass
class Regressor:
    """A solved and trained teacher-to-student regressor."""

    spec: RegressorSpec
    state: RegressorState


@dataclass
class TeacherSignals:
    """Teacher outputs for one batch, all detached."""

    logits: Tensor | None = None
    regressed_map: Tensor | None = None


@dataclass
class TransferContext:
    """Frozen teacher-side components plus the optional FitNet hint layer."""

    teacher: Model | None = None
    regressor: Regressor | None = None
    hint: Model | None = None
    hint_optimizer: OptimizerState | None = None

    def signals(self, images: Tensor, need_logits: bool, need_map: bool) -> TeacherSignals:
        """Run the frozen teacher (and regressor) without recording."""
        if not (need_logits or need_map):
            return TeacherSignals()
        if self.teacher is None:
            raise ValueError("Teacher outputs requested but no teacher is loaded")
        with no_grad():
            m_t = forward_generator(self.teacher.state, self.teacher.spec, images)
            logits = None
            if need_logits:
                logits = forward_classifier(self.teacher.state, self.teacher.spec, m_t)
            regressed = None
            if need_map:
                if self.regressor is None:
                    raise ValueError("Feature transfer requested but no regressor is loaded")
                regressed = apply_regressor(self.regressor.state, self.regressor.spec, m_t)
        return TeacherSignals(logits, regressed)


@dataclass
class AdversarialOptimizers:
    """Separate optimizers for the three adversarial sub-updates."""

    discriminator: OptimizerState
    generator: OptimizerState
    classifier: OptimizerState

    @classmethod
    def from_config(cls, cfg: TrainConfig, learning_rate: float | None = None) -> "AdversarialOptimizers":
        """Fresh optimizers at the adversarial learning rate."""
        lr = cfg.lr_adversarial if learning_rate is None else learning_rate
        return cls(
            OptimizerState(lr, cfg.momentum, cfg.weight_decay),
            OptimizerState(lr, cfg.momentum, cfg.weight_decay),
            OptimizerState(lr, cfg.momentum, cfg.weight_decay),
        )


@dataclass
class StepResult:
    """Losses and discriminator statistics of one update."""

    losses: dict[str, float] = field(default_factory=dict)
    d_teacher: float | None = None
    d_student: float | None = None


def _checked(loss: LossValue, phase: str, iteration: int) -> float:
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingAbortedError(loss.component, phase, iteration)
    return value


def _needs_logits(cfg: TrainConfig) -> bool:
    return cfg.uses_kd and cfg.kd_weight > 0


def primary_loss(logits: Tensor, labels: np.ndarray, signals: TeacherSignals, cfg: TrainConfig) -> LossValue:
    """Cross-entropy, or the distillation loss for KD methods with a non-zero teacher weight."""
    if _needs_logits(cfg):
        assert signals.logits is not None
        return kd_loss(
            logits, signals.logits, cfg.temperature, cfg.kd_weight, labels, cfg.kd_t_squared
        )
    return cross_entropy(logits, labels)


def pretrain_step(
    student: Model,
    context: TransferContext,
    step: Step,
    cfg: TrainConfig,
    opt: OptimizerState,
    phase: str = "pretrain",
) -> tuple[Model, StepResult]:
    """Joint generator + classifier update on primary + w * mse_fm.

    w is beta (fitnet_weight for FitNet). With w = 0 the teacher maps are
    not computed and the update equals plain label training.
    """
    weight = cfg.transfer_weight
    signals = context.signals(step.images, _needs_logits(cfg), weight > 0)
    hint = context.hint if weight > 0 else None

    with GradTape() as tape:
        tape.watch_all(student.state.trainable().values())
        if hint is not None:
            tape.watch_all(hint.state.trainable().values())
        m_s = forward_generator(student.state, student.spec, step.images)
        logits = forward_classifier(student.state, student.spec, m_s)
        primary = primary_loss(logits, step.labels, signals, cfg)
        mse = None
        if weight > 0:
            assert signals.regressed_map is not None
            mapped = m_s if hint is None else forward_generator(hint.state, hint.spec, m_s)
            mse = mse_feature_loss(signals.regressed_map, mapped)
        total = student_total_loss(primary, None, mse, 0.0, weight)

    result = StepResult()
    result.losses[primary.component] = _checked(primary, phase, step.index)
    if mse is not None:
        result.losses["mse_fm"] = _checked(mse, phase, step.index)
    result.losses["total"] = _checked(total, phase, step.index)

    grads = backward(total.value, tape)
    state = sgd_step(student.state, grads.by_name(student.state.trainable()), opt)
    if hint is not None:
        assert context.hint_optimizer is not None
        context.hint = Model(
            hint.spec,
            sgd_step(hint.state, grads.by_name(hint.state.trainable()), context.hint_optimizer),
        )
    return Model(student.spec, state), result


def pretrain_student(
    student: Model,
    context: TransferContext,
    steps: Iterable[Step],
    cfg: TrainConfig,
    opt: OptimizerState,
    metrics: MetricsLogger | None = None,
    after_step: Callable[[Model, Step], None] | None = None,
) -> tuple[Model, list[MetricsRecord]]:
    """Run pretraining steps: L = primary + beta * mse(R(m_t), m_s).

    Teacher and regressor parameters are only read. The learning rate
    follows the step decay schedule of `cfg.lr_main`.

    Args:
        student: Network to train.
        context: Frozen teacher side.
        steps: Batches to train on, consumed in order.
        cfg: Run hyperparameters.
        opt: Optimizer of the student (and the rate it reports).
        metrics: Receives one record per step.
        after_step: Called with the updated student once each step is logged.

    Returns:
        Updated student and one "pretrain" record per step.
    """
    records = []
    for step in steps:
        opt.learning_rate = scheduled_learning_rate(
            cfg.lr_main, step.epoch, cfg.lr_decay_epochs, cfg.lr_decay_factor
        )
        tick = time.perf_counter()
        try:
            student, result = pretrain_step(student, context, step, cfg, opt)
        except NonFiniteError as e:
            raise TrainingAbortedError("parameters", "pretrain", step.index) from e
        record = MetricsRecord(
            phase="pretrain",
            iteration=step.index,
            epoch=step.epoch,
            losses=result.losses,
            learning_rate=opt.learning_rate,
            wall_clock=time.perf_counter() - tick,
        )
        records.append(record)
        if metrics:
            metrics.log_record(record)
        if after_step:
            after_step(student, step)
    return student, records


def _discriminate(discriminator: Model, maps: Tensor) -> Tensor:
    return forward(discriminator.state, discriminator.spec, maps)


def discriminator_update(
    discriminator: Model,
    student: Model,
    signals: TeacherSignals,
    step: Step,
    opt: OptimizerState,
) -> tuple[Model, StepResult]:
    """Update D only, on regressed teacher maps vs. detached student maps."""
    assert signals.regressed_map is not None
    with no_grad():
        m_s = forward_generator(student.state, student.spec, step.images)
    with GradTape() as tape:
        tape.watch_all(discriminator.state.trainable().values())
        d_teacher = _discriminate(discriminator, signals.regressed_map)
        d_student = _discriminate(discriminator, m_s.detach())
        loss = discriminator_loss(d_teacher, d_student)
    result = StepResult(
        losses={"adv_d": _checked(loss, "adversarial", step.index)},
        d_teacher=float(d_teacher.data.mean()),
        d_student=float(d_student.data.mean()),
    )
    grads = backward(loss.value, tape)
    state = sgd_step(discriminator.state, grads.by_name(discriminator.state.trainable()), opt)
    return Model(discriminator.spec, state), result


def generator_update(
    student: Model,
    discriminator: Model,
    signals: TeacherSignals,
    step: Step,
    cfg: TrainConfig,
    opt: OptimizerState,
) -> tuple[Model, StepResult]:
    """Update the student generator on primary + alpha * adv_g + beta * mse_fm.

    Gradients pass through D's forward pass, but only generator parameters
    are watched, so D and the classifier stay unchanged.
    """
    trainable = {
        n: t for n, t in generator_parameters(student.state).items() if not student.state.is_frozen(n)
    }
    with GradTape() as tape:
        tape.watch_all(trainable.values())
        m_s = forward_generator(student.state, student.spec, step.images)
        logits = forward_classifier(student.state, student.spec, m_s)
        primary = primary_loss(logits, step.labels, signals, cfg)
        adv = None
        if cfg.alpha > 0:
            adv = generator_adversarial_loss(_discriminate(discriminator, m_s))
        mse = None
        if cfg.beta > 0:
            assert signals.regressed_map is not None
            mse = mse_feature_loss(signals.regressed_map, m_s)
        total = student_total_loss(primary, adv, mse, cfg.alpha, cfg.beta)

    result = StepResult()
    result.losses[primary.component] = _checked(primary, "adversarial", step.index)
    if adv is not None:
        result.losses["adv_g"] = _checked(adv, "adversarial", step.index)
    if mse is not None:
        result.losses["mse_fm"] = _checked(mse, "adversarial", step.index)
    result.losses["total"] = _checked(total, "adversarial", step.index)

    grads = backward(total.value, tape)
    state = sgd_step(student.state, grads.by_name(trainable), opt)
    return Model(student.spec, state), result


def classifier_update(
    student: Model,
    signals: TeacherSignals,
    step: Step,
    cfg: TrainConfig,
    opt: OptimizerState,
) -> Model:
    """Update the classifier C on the primary label loss alone."""
    trainable = {
        n: t for n, t in classifier_parameters(student.state).items() if not student.state.is_frozen(n)
    }
    with no_grad():
        m_s = forward_generator(student.state, student.spec, step.images)
    with GradTape() as tape:
        tape.watch_all(trainable.values())
        logits = forward_classifier(student.state, student.spec, m_s)
        loss = primary_loss(logits, step.labels, signals, cfg)
    _checked(loss, "adversarial", step.index)
    grads = backward(loss.value, tape)
    return Model(student.spec, sgd_step(student.state, grads.by_name(trainable), opt))


def adversarial_step(
    student: Model,
    discriminator: Model,
    context: TransferContext,
    step: Step,
    cfg: TrainConfig,
    optimizers: AdversarialOptimizers,
) -> tuple[Model, Model, MetricsRecord]:
    """One adversarial iteration: D (d_steps times), then S, then C.

    Both networks see the same batch. The record carries the first D
    update's discriminator statistics and the S update's losses.
    """
    tick = time.perf_counter()
    signals = context.signals(step.images, _needs_logits(cfg), True)

    d_result = StepResult()
    for d_step in range(cfg.d_steps):
        discriminator, result = discriminator_update(
            discriminator, student, signals, step, optimizers.discriminator
        )
        if d_step == 0:
            d_result = result

    student, s_result = generator_update(
        student, discriminator, signals, step, cfg, optimizers.generator
    )
    student = classifier_update(student, signals, step, cfg, optimizers.classifier)

    record = MetricsRecord(
        phase="adversarial",
        iteration=step.index,
        epoch=step.epoch,
        losses={**s_result.losses, **d_result.losses},
        d_teacher=d_result.d_teacher,
        d_student=d_result.d_student,
        learning_rate=optimizers.generator.learning_rate,
        wall_clock=time.perf_counter() - tick,
    )
    return student, discriminator, record
