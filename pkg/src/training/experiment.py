"""One training run: method dispatch, step schedule and per-epoch evaluation.

Every method runs on a single step-driven batch stream. Non-adversarial
methods spend all `epochs * steps_per_epoch` steps in the pretrain phase;
ktan and ktan_kd spend the first k steps there and the rest in the
adversarial phase. An eval record closes every epoch and the run.
"""

import time
from dataclasses import dataclass
from itertools import islice

from src.data.dataset import Dataset
from src.models.records import MetricsRecord, RunSummary
from src.nn.architectures import build_architecture
from src.nn.layers import NetworkSpec
from src.nn.network import init_network
from src.nn.optim import OptimizerState, scheduled_learning_rate
from src.tensor.tensor import NonFiniteError, per_op_finite_checks
from src.training.config import ADVERSARIAL_METHODS, TrainConfig, validate_train_config
from src.training.evaluation import evaluate
from src.training.ktan import (
    AdversarialOptimizers,
    Model,
    Regressor,
    TrainingAbortedError,
    TransferContext,
    adversarial_step,
    pretrain_student,
)
from src.training.regressor import (
    RegressorGeometryError,
    init_regressor,
    solve_regressor_geometry,
    train_regressor,
)
from src.training.schedule import BatchStream, RunStreams, Step
from src.utils.hashing import config_hash
from src.utils.logging import MetricsLogger, logger


class ExperimentError(Exception):
    """Raised when a run cannot start (invalid config or missing prerequisite)."""

    pass


@dataclass
class ExperimentResult:
    """Everything a finished run produced."""

    summary: RunSummary
    records: list[MetricsRecord]
    model: Model
    optimizer: OptimizerState
    regressor: Regressor | None = None
    discriminator: Model | None = None


@dataclass(frozen=True)
class PhasePlan:
    """Step counts of the two student phases."""

    pretrain_steps: int
    adversarial_steps: int

    @property
    def total(self) -> int:
        return self.pretrain_steps + self.adversarial_steps


def plan_phases(cfg: TrainConfig, steps_per_epoch: int) -> PhasePlan:
    """Split the run into pretraining and adversarial steps.

    k defaults to one epoch. The adversarial phase fills the remaining
    epoch budget unless `adversarial_iterations` fixes it. With alpha = 0
    the adversarial steps carry no adversarial term, so they run as
    pretraining steps and D is never built.
    """
    budget = cfg.epochs * steps_per_epoch
    if cfg.method not in ADVERSARIAL_METHODS:
        return PhasePlan(budget, 0)
    if cfg.k_pretrain_steps is not None:
        k = cfg.k_pretrain_steps
    elif cfg.k_pretrain_epochs is not None:
        k = cfg.k_pretrain_epochs * steps_per_epoch
    else:
        k = steps_per_epoch
    if cfg.adversarial_iterations is not None:
        adversarial = cfg.adversarial_iterations
    else:
        adversarial = max(budget - k, 0)
    if cfg.alpha == 0:
        return PhasePlan(k + adversarial, 0)
    return PhasePlan(k, adversarial)


def _network_for(
    cfg: TrainConfig,
    data: Dataset,
    architecture: str,
    student_init: Model | None,
    streams: RunStreams,
) -> Model:
    if student_init is not None:
        if tuple(student_init.spec.input_shape) != data.image_shape:
            raise ExperimentError(
                f"Initial network expects inputs {student_init.spec.input_shape}, "
                f"dataset images are {data.image_shape}"
            )
        return Model(student_init.spec, student_init.state.unfrozen_copy())
    spec = build_architecture(architecture, data.image_shape, classes=data.class_count)
    return Model(spec, init_network(spec, streams.init, cfg.precision))


def prepare_regressor(
    cfg: TrainConfig,
    teacher: Model,
    student_spec: NetworkSpec,
    train: Dataset,
    streams: RunStreams,
    metrics: MetricsLogger | None = None,
) -> Regressor:
    """Solve the regressor geometry and train it on the training split."""
    try:
        spec = solve_regressor_geometry(
            teacher.spec.feature_shape,
            student_spec.feature_shape,
            cfg.regressor_stride,
            cfg.regressor_padding,
        )
    except RegressorGeometryError as e:
        raise ExperimentError(str(e)) from e
    state = init_regressor(spec, streams.regressor, cfg.precision)
    steps = cfg.regressor_steps
    if steps is None:
        steps = BatchStream(train, cfg.batch_size, cfg.seed).steps_per_epoch
    state = train_regressor(
        teacher.spec,
        teacher.state,
        spec,
        state,
        train,
        steps,
        OptimizerState(cfg.regressor_lr, cfg.momentum, cfg.weight_decay),
        batch_size=cfg.batch_size,
        seed=cfg.seed,
        head_seed=streams.regressor,
        metrics=metrics,
    )
    return Regressor(spec, state)


def _check_prerequisites(
    cfg: TrainConfig,
    student: Model,
    teacher: Model | None,
    regressor: Regressor | None,
    data: Dataset,
) -> None:
    if teacher is None:
        raise ExperimentError(f"Method {cfg.method!r} requires a pretrained teacher")
    if tuple(teacher.spec.input_shape) != data.image_shape:
        raise ExperimentError(
            f"Teacher expects inputs {teacher.spec.input_shape}, dataset images are {data.image_shape}"
        )
    if cfg.uses_kd and teacher.spec.output_size != student.spec.output_size:
        raise ExperimentError("Teacher and student disagree on the number of classes")
    if regressor is not None:
        if regressor.spec.teacher_shape != tuple(teacher.spec.feature_shape):
            raise ExperimentError(
                f"Regressor input {regressor.spec.teacher_shape} does not match teacher maps "
                f"{teacher.spec.feature_shape}"
            )
        if regressor.spec.student_shape != tuple(student.spec.feature_shape):
            raise ExperimentError(
                f"Regressor output {regressor.spec.student_shape} does not match student maps "
                f"{student.spec.feature_shape}"
            )


def _eval_record(
    cfg: TrainConfig, model: Model, train: Dataset, test: Dataset, index: int, epoch: int
) -> MetricsRecord:
    tick = time.perf_counter()
    train_accuracy = evaluate(model.state, model.spec, train) if cfg.eval_train_accuracy else None
    return MetricsRecord(
        phase="eval",
        iteration=index,
        epoch=epoch,
        train_accuracy=train_accuracy,
        test_accuracy=evaluate(model.state, model.spec, test),
        wall_clock=time.perf_counter() - tick,
    )


def run_experiment(
    cfg: TrainConfig,
    train: Dataset,
    test: Dataset,
    teacher: Model | None = None,
    regressor: Regressor | None = None,
    student_init: Model | None = None,
    metrics: MetricsLogger | None = None,
    teacher_architecture: str = "desk-teacher",
    student_architecture: str = "desk-student",
) -> ExperimentResult:
    """Train one network according to `cfg.method`.

    Args:
        cfg: Run hyperparameters.
        train: Training split (augmented when enabled).
        test: Held-out split used by eval records.
        teacher: Pretrained teacher; required by every transfer method.
        regressor: Trained regressor; it is trained in-process when a
            method needs one and none is given.
        student_init: Optional pretrained network to start from.
        metrics: Receives every record; an in-memory logger is used when None.
        teacher_architecture: Architecture trained by the teacher method.
        student_architecture: Architecture of every other method.

    Returns:
        ExperimentResult with the summary, all records and the trained parts.

    Raises:
        ExperimentError: If the config is invalid or a prerequisite is missing.
        TrainingAbortedError: If a loss or parameter becomes non-finite.
    """
    issues = validate_train_config(cfg)
    if issues:
        raise ExperimentError("; ".join(issues))
    if train.class_count != test.class_count or train.image_shape != test.image_shape:
        raise ExperimentError("Train and test splits disagree on classes or image shape")

    metrics = metrics if metrics is not None else MetricsLogger()
    streams = RunStreams.from_seed(cfg.seed)
    architecture = teacher_architecture if cfg.method == "teacher" else student_architecture
    model = _network_for(cfg, train, architecture, student_init, streams)

    context = TransferContext()
    if cfg.needs_teacher:
        _check_prerequisites(cfg, model, teacher, regressor, train)
        assert teacher is not None
        context.teacher = Model(teacher.spec, teacher.state.frozen_copy())
        if cfg.needs_regressor:
            if regressor is None:
                regressor = prepare_regressor(cfg, context.teacher, model.spec, train, streams, metrics)
            context.regressor = regressor
        if cfg.method == "fitnet" and cfg.transfer_weight > 0:
            hint_spec = build_architecture("hint-regressor", model.spec.feature_shape)
            context.hint = Model(hint_spec, init_network(hint_spec, streams.hint, cfg.precision))
            context.hint_optimizer = OptimizerState(cfg.lr_main, cfg.momentum, cfg.weight_decay)

    stream = BatchStream(train, cfg.batch_size, cfg.seed, cfg.augment, streams.augment, cfg.precision)
    plan = plan_phases(cfg, stream.steps_per_epoch)
    opt = OptimizerState(cfg.lr_main, cfg.momentum, cfg.weight_decay)

    discriminator = None
    adversarial_opts = None
    if plan.adversarial_steps > 0:
        d_spec = build_architecture(
            "discriminator", model.spec.feature_shape, channels=cfg.discriminator_channels
        )
        discriminator = Model(d_spec, init_network(d_spec, streams.discriminator, cfg.precision))
        adversarial_opts = AdversarialOptimizers.from_config(cfg)

    logger.info(
        f"Training {cfg.method} ({model.spec.name}): {plan.pretrain_steps} pretrain + "
        f"{plan.adversarial_steps} adversarial steps, {stream.steps_per_epoch} steps/epoch"
    )
    evals: list[MetricsRecord] = []

    def close_epoch(current: Model, step: Step) -> None:
        if step.last_in_epoch or step.index == plan.total - 1:
            evaluation = _eval_record(cfg, current, train, test, len(evals), step.epoch)
            evals.append(evaluation)
            metrics.log_record(evaluation)

    steps = stream.take(plan.total)
    with per_op_finite_checks(False):
        metrics.log_phase_start("pretrain", plan.pretrain_steps)
        started = time.perf_counter()
        model, _ = pretrain_student(
            model, context, islice(steps, plan.pretrain_steps), cfg, opt, metrics, close_epoch
        )
        metrics.log_phase_complete("pretrain", plan.pretrain_steps, time.perf_counter() - started)

        if plan.adversarial_steps > 0:
            assert discriminator is not None and adversarial_opts is not None
            metrics.log_phase_start("adversarial", plan.adversarial_steps)
            started = time.perf_counter()
            for step in steps:
                lr = scheduled_learning_rate(
                    cfg.lr_adversarial, step.epoch, cfg.lr_decay_epochs, cfg.lr_decay_factor
                )
                for optimizer in (
                    adversarial_opts.discriminator,
                    adversarial_opts.generator,
                    adversarial_opts.classifier,
                ):
                    optimizer.learning_rate = lr
                try:
                    model, discriminator, record = adversarial_step(
                        model, discriminator, context, step, cfg, adversarial_opts
                    )
                except NonFiniteError as e:
                    raise TrainingAbortedError("parameters", "adversarial", step.index) from e
                metrics.log_record(record)
                close_epoch(model, step)
            metrics.log_phase_complete(
                "adversarial", plan.adversarial_steps, time.perf_counter() - started
            )

    if not evals:
        evaluation = _eval_record(cfg, model, train, test, 0, 0)
        evals.append(evaluation)
        metrics.log_record(evaluation)

    best = max(range(len(evals)), key=lambda i: (evals[i].test_accuracy or 0.0, -i))
    final = evals[-1]
    summary = RunSummary(
        method=cfg.method,
        seed=cfg.seed,
        epochs=len(evals),
        steps=plan.total,
        final_train_accuracy=final.train_accuracy,
        final_test_accuracy=final.test_accuracy or 0.0,
        best_epoch=evals[best].epoch,
        best_test_accuracy=evals[best].test_accuracy or 0.0,
        config_hash=config_hash(cfg.to_dict()),
    )
    logger.info(
        f"{cfg.method} finished: test accuracy {summary.final_test_accuracy:.4f} "
        f"(best {summary.best_test_accuracy:.4f} at epoch {summary.best_epoch})"
    )
    return ExperimentResult(
        summary=summary,
        records=list(metrics.records),
        model=model,
        optimizer=opt,
        regressor=regressor,
        discriminator=discriminator,
    )
