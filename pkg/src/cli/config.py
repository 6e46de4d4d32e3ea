"""Experiment configuration: loading, validation and the reference file."""

import types
from dataclasses import MISSING, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Union, get_args, get_origin, get_type_hints

import yaml

from src.data.augment import AugmentConfig
from src.data.dataset import Dataset, DatasetError, load_dataset
from src.data.synthetic import SyntheticSpec, generate_synthetic, validate_spec
from src.nn.architectures import ARCHITECTURES
from src.training.config import METHODS, TrainConfig, validate_train_config


class ConfigError(Exception):
    """Raised when a configuration file cannot be parsed.

    Attributes:
        key: Dotted path of the offending key, when known.
        line: 1-based line in the file, when known.
    """

    def __init__(self, message: str, key: str | None = None, line: int | None = None) -> None:
        self.key = key
        self.line = line
        where = []
        if key:
            where.append(f"key '{key}'")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


def _help(text: str, default: Any = MISSING, factory: Any = MISSING) -> Any:
    if factory is not MISSING:
        return field(default_factory=factory, metadata={"help": text})
    return field(default=default, metadata={"help": text})


@dataclass
class DatasetConfig:
    """Dataset source and augmentation."""

    train_path: str | None = _help("KTDS file of the train split; synthetic data when unset", None)
    test_path: str | None = _help("KTDS file of the test split", None)
    classes: int = _help("Synthetic shape classes", 4)
    samples_per_class: int = _help("Synthetic train samples per class", 500)
    test_samples_per_class: int = _help("Synthetic test samples per class", 100)
    image_size: int = _help("Synthetic image height and width", 16)
    channels: int = _help("Synthetic image channels (1 or 3)", 1)
    noise: float = _help("Synthetic additive noise level", 0.15)
    clutter: int = _help("Synthetic distractor strokes per image", 2)
    seed: int = _help("Synthetic generator seed", 0)
    augment: bool = _help("Augment training batches", True)
    flip_probability: float = _help("Horizontal flip probability", 0.5)
    crop_padding: int = _help("Zero padding before the random crop", 2)


@dataclass
class TeacherConfig:
    """Teacher network."""

    architecture: str = _help("Teacher architecture", "desk-teacher")
    checkpoint: str | None = _help("Pretrained teacher checkpoint for transfer methods", None)
    epochs: int = _help("Epochs of train-teacher", 15)


@dataclass
class StudentConfig:
    """Student network."""

    architecture: str = _help("Student architecture", "desk-student")
    checkpoint: str | None = _help("Optional pretrained student to start from", None)


@dataclass
class MethodConfig:
    """Training method and loss weights."""

    name: str = _help(f"One of: {', '.join(METHODS)}", "ktan")
    epochs: int = _help("Training epochs", 10)
    batch_size: int = _help("Mini-batch size", 32)
    precision: str = _help("single or double", "single")
    alpha: float = _help("Weight of the generator adversarial loss", 0.6)
    beta: float = _help("Weight of the feature-map MSE loss", 0.5)
    temperature: float = _help("Distillation temperature", 4.0)
    kd_weight: float = _help("Weight of the teacher soft targets in [0, 1]", 0.9)
    kd_t_squared: bool = _help("Scale the soft-target term by T^2", True)
    fitnet_weight: float = _help("Transfer weight of the fitnet method", 4.0)
    eval_train_accuracy: bool = _help("Also evaluate on the train split each epoch", True)


@dataclass
class OptimizerConfig:
    """SGD settings of the main training phase."""

    learning_rate: float = _help("Learning rate", 0.2)
    momentum: float = _help("Momentum", 0.9)
    weight_decay: float = _help("L2 weight decay", 1e-4)
    decay_epochs: list[int] = _help("Epochs at which the rate is multiplied by decay_factor", factory=list)
    decay_factor: float = _help("Learning-rate decay multiplier", 0.1)


@dataclass
class AdversarialConfig:
    """Adversarial phase of ktan and ktan_kd."""

    learning_rate: float = _help("Learning rate of D, S and C updates", 1e-2)
    k_pretrain_steps: int | None = _help("Pretraining steps before the adversarial phase", None)
    k_pretrain_epochs: int | None = _help("Pretraining epochs (alternative to steps)", None)
    iterations: int | None = _help("Adversarial iterations; fills the epoch budget when unset", None)
    d_steps: int = _help("Discriminator updates per student update", 1)
    discriminator_channels: int = _help("Discriminator convolution channels", 16)


@dataclass
class RegressorConfig:
    """Teacher-to-student regressor."""

    checkpoint: str | None = _help("Trained regressor checkpoint; trained in-process when unset", None)
    stride: int = _help("Regressor stride", 1)
    padding: int = _help("Regressor padding", 0)
    learning_rate: float = _help("Regressor learning rate", 1e-2)
    steps: int | None = _help("Regressor training steps; one epoch when unset", None)


@dataclass
class OutputConfig:
    """Run output."""

    directory: str = _help("Output directory", "runs/ktan")


@dataclass
class ExperimentConfig:
    """Complete experiment configuration."""

    seed: int = _help("Run seed", 0)
    dataset: DatasetConfig = _help("Dataset", factory=DatasetConfig)
    teacher: TeacherConfig = _help("Teacher", factory=TeacherConfig)
    student: StudentConfig = _help("Student", factory=StudentConfig)
    method: MethodConfig = _help("Method", factory=MethodConfig)
    optimizer: OptimizerConfig = _help("Optimizer", factory=OptimizerConfig)
    adversarial: AdversarialConfig = _help("Adversarial phase", factory=AdversarialConfig)
    regressor: RegressorConfig = _help("Regressor", factory=RegressorConfig)
    output: OutputConfig = _help("Output", factory=OutputConfig)


def _key_lines(node: yaml.Node | None, prefix: str = "") -> dict[str, int]:
    """Map dotted key paths to their 1-based line in the document."""
    lines: dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}{key_node.value}"
            lines[path] = key_node.start_mark.line + 1
            lines.update(_key_lines(value_node, f"{path}."))
    return lines


def _coerce(value: Any, annotation: Any, key: str, line: int | None) -> Any:
    origin = get_origin(annotation)
    if origin in (Union, types.UnionType):
        if value is None:
            return None
        options = [a for a in get_args(annotation) if a is not type(None)]
        return _coerce(value, options[0], key, line)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError("Expected a list", key, line)
        (item_type,) = get_args(annotation)
        return [_coerce(v, item_type, key, line) for v in value]
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigError("Expected true or false", key, line)
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("Expected an integer", key, line)
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("Expected a number", key, line)
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigError("Expected a string", key, line)
        return value
    raise ConfigError(f"Unsupported type {annotation}", key, line)


def _parse_section(cls: type, data: Any, prefix: str, lines: dict[str, int]) -> Any:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("Expected a mapping", prefix.rstrip(".") or None, lines.get(prefix.rstrip(".")))
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            path = f"{prefix}{key}"
            raise ConfigError("Unknown key", path, lines.get(path))
    values = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        path = f"{prefix}{f.name}"
        annotation = hints[f.name]
        if is_dataclass(annotation):
            values[f.name] = _parse_section(annotation, data[f.name], f"{path}.", lines)  # type: ignore[arg-type]
        else:
            values[f.name] = _coerce(data[f.name], annotation, path, lines.get(path))
    return cls(**values)


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse YAML text into an ExperimentConfig.

    Raises:
        ConfigError: On YAML syntax errors, unknown keys or mistyped values.
    """
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"Invalid YAML: {getattr(e, 'problem', e)}", line=mark.line + 1 if mark else None) from e
    return _parse_config(data, _key_lines(node))


def _parse_config(data: Any, lines: dict[str, int] | None = None) -> ExperimentConfig:
    """Parse a configuration dictionary into an ExperimentConfig."""
    return _parse_section(ExperimentConfig, data, "", lines or {})  # type: ignore[no-any-return]


def load_config(config_path: Path | None = None) -> ExperimentConfig:
    """Load configuration from file.

    Args:
        config_path: Path to YAML config file. Defaults to config.yaml when present.

    Returns:
        Loaded ExperimentConfig; defaults when no file is found.

    Raises:
        ConfigError: If the file cannot be parsed.
    """
    if config_path is None:
        for default_path in ["config.yaml", "config.yml"]:
            if Path(default_path).exists():
                config_path = Path(default_path)
                break
        else:
            return ExperimentConfig()

    if not config_path.exists():
        raise ConfigError(f"Config file not found: {config_path}")
    return parse_config_text(config_path.read_text(encoding="utf-8"))


def validate_config(config: ExperimentConfig) -> list[str]:
    """Validate configuration, return list of issues.

    Args:
        config: Configuration to validate.

    Returns:
        List of validation issue messages.
    """
    issues = []
    ds = config.dataset
    if (ds.train_path is None) != (ds.test_path is None):
        issues.append("dataset.train_path and dataset.test_path must be set together")
    if ds.train_path is None:
        try:
            validate_spec(synthetic_spec(config))
        except DatasetError as e:
            issues.append(f"dataset: {e}")
    if not 0.0 <= ds.flip_probability <= 1.0:
        issues.append("dataset.flip_probability must lie in [0, 1]")
    if ds.crop_padding < 0:
        issues.append("dataset.crop_padding cannot be negative")

    for section in (config.teacher, config.student):
        if section.architecture not in ARCHITECTURES:
            issues.append(f"Unknown architecture: {section.architecture!r}")

    if config.method.name not in METHODS:
        issues.append(f"Invalid method.name: {config.method.name!r} (expected one of {', '.join(METHODS)})")
        return issues
    if config.teacher.epochs < 1:
        issues.append("teacher.epochs must be >= 1")
    if not issues:
        issues.extend(validate_train_config(to_train_config(config)))
    return issues


def synthetic_spec(config: ExperimentConfig) -> SyntheticSpec:
    """Synthetic dataset described by the dataset section."""
    ds = config.dataset
    return SyntheticSpec(
        classes=ds.classes,
        samples_per_class=ds.samples_per_class,
        test_samples_per_class=ds.test_samples_per_class,
        image_size=ds.image_size,
        channels=ds.channels,
        noise=ds.noise,
        clutter=ds.clutter,
    )


def load_datasets(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Load the configured dataset files, or generate the synthetic pair."""
    ds = config.dataset
    if ds.train_path is not None and ds.test_path is not None:
        return load_dataset(Path(ds.train_path)), load_dataset(Path(ds.test_path))
    return generate_synthetic(synthetic_spec(config), ds.seed)


def to_train_config(config: ExperimentConfig, method: str | None = None) -> TrainConfig:
    """Flatten a file configuration into run hyperparameters.

    Args:
        config: Parsed configuration.
        method: Method override; "teacher" also selects teacher.epochs.
    """
    name = method or config.method.name
    m, opt, adv, reg, ds = (
        config.method,
        config.optimizer,
        config.adversarial,
        config.regressor,
        config.dataset,
    )
    return TrainConfig(
        method=name,
        seed=config.seed,
        epochs=config.teacher.epochs if name == "teacher" else m.epochs,
        batch_size=m.batch_size,
        precision=m.precision,
        alpha=m.alpha,
        beta=m.beta,
        temperature=m.temperature,
        kd_weight=m.kd_weight,
        kd_t_squared=m.kd_t_squared,
        fitnet_weight=m.fitnet_weight,
        lr_main=opt.learning_rate,
        lr_adversarial=adv.learning_rate,
        momentum=opt.momentum,
        weight_decay=opt.weight_decay,
        lr_decay_epochs=list(opt.decay_epochs),
        lr_decay_factor=opt.decay_factor,
        k_pretrain_steps=adv.k_pretrain_steps,
        k_pretrain_epochs=adv.k_pretrain_epochs,
        adversarial_iterations=adv.iterations,
        d_steps=adv.d_steps,
        discriminator_channels=adv.discriminator_channels,
        regressor_stride=reg.stride,
        regressor_padding=reg.padding,
        regressor_lr=reg.learning_rate,
        regressor_steps=reg.steps,
        augment=AugmentConfig(ds.flip_probability, ds.crop_padding, ds.augment),
        eval_train_accuracy=m.eval_train_accuracy,
    )


def _yaml_scalar(value: Any) -> str:
    text: str = yaml.safe_dump(value, default_flow_style=True)
    return text.replace("\n...\n", "").strip()


def _render_section(obj: Any, indent: str) -> list[str]:
    out = []
    for f in fields(obj):
        value = getattr(obj, f.name)
        help_text = f.metadata.get("help")
        if is_dataclass(value):
            out.append("")
            if help_text:
                out.append(f"{indent}# {help_text}")
            out.append(f"{indent}{f.name}:")
            out.extend(_render_section(value, indent + "  "))
            continue
        if help_text:
            out.append(f"{indent}# {help_text}")
        out.append(f"{indent}{f.name}: {_yaml_scalar(value)}")
    return out


def render_reference_config(config: ExperimentConfig | None = None) -> str:
    """Documented YAML for a configuration, every key with its help text.

    Parsing the text yields `config` (the defaults when omitted).
    """
    lines = ["# KTAN experiment configuration", "# Generated reference; every key is optional."]
    lines.extend(_render_section(config or ExperimentConfig(), ""))
    return "\n".join(lines) + "\n"


def create_default_config(path: Path) -> None:
    """Create default configuration file.

    Args:
        path: Path to write config file.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_reference_config(), encoding="utf-8")
