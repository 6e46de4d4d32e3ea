"""CLI commands using Typer.

Training modules are imported inside the commands so that `--threads`
reaches the BLAS thread pools before numpy is loaded.
"""

import json
import os
import shutil
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

import typer
from rich.console import Console

from src.cli.output import RichOutput

if TYPE_CHECKING:
    from src.cli.config import ExperimentConfig
    from src.data.dataset import Dataset
    from src.training.ktan import Model, Regressor

app = typer.Typer(
    name="ktan",
    help="Adversarial feature-map knowledge transfer: train teachers, regressors and students.",
    add_completion=False,
)
console = Console()
output = RichOutput(console)

# Exit status of a run aborted by a non-finite loss
EXIT_NON_FINITE = 2

THREAD_VARIABLES = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


@app.callback()
def main(
    threads: Optional[int] = typer.Option(
        None,
        "--threads",
        min=1,
        help="Threads for numpy's linear algebra (1 for byte-identical reruns)",
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging with timestamps"),
    log_file: Optional[Path] = typer.Option(None, "--log-file", help="Also log to this file"),
) -> None:
    """Knowledge transfer experiments at desk scale."""
    if threads is not None:
        for variable in THREAD_VARIABLES:
            os.environ[variable] = str(threads)

    from src.utils.logging import setup_logging

    setup_logging("DEBUG" if verbose else "INFO", log_file, verbose)


def get_config(
    config_path: Optional[Path],
    seed: Optional[int] = None,
    out: Optional[Path] = None,
) -> "ExperimentConfig":
    """Load configuration, apply command-line overrides and validate.

    Args:
        config_path: Optional path to config file.
        seed: Overrides the config's seed.
        out: Overrides the output directory.

    Returns:
        Validated ExperimentConfig.

    Raises:
        typer.Exit: If the configuration cannot be parsed or is invalid.
    """
    from src.cli.config import ConfigError, load_config, validate_config

    try:
        config = load_config(config_path)
    except ConfigError as e:
        output.print_error("Invalid configuration", str(e))
        raise typer.Exit(1)

    if seed is not None:
        config.seed = seed
    if out is not None:
        config.output.directory = str(out)

    issues = validate_config(config)
    if issues:
        output.print_issues(issues)
        raise typer.Exit(1)
    return config


def prepare_output_dir(directory: Path, overwrite: bool) -> Path:
    """Claim an output directory.

    Raises:
        typer.Exit: If the directory holds files and overwrite is not set.
    """
    if directory.exists() and any(directory.iterdir()):
        if not overwrite:
            output.print_error(
                f"Output directory {directory} is not empty",
                "Pass --overwrite to replace it or choose another --out.",
            )
            raise typer.Exit(1)
        shutil.rmtree(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _load_datasets(config: "ExperimentConfig") -> tuple["Dataset", "Dataset"]:
    from src.cli.config import load_datasets
    from src.data.dataset import DatasetError

    try:
        return load_datasets(config)
    except DatasetError as e:
        output.print_error("Cannot load dataset", str(e))
        raise typer.Exit(1)


def _load_network(path: Optional[str], role: str, what: str) -> Optional["Model"]:
    from src.training.artifacts import load_model
    from src.utils.checkpoint import CheckpointError

    if path is None:
        return None
    try:
        return load_model(Path(path), role)
    except (CheckpointError, OSError) as e:
        output.print_error(f"Cannot load {what} checkpoint {path}", str(e))
        raise typer.Exit(1)


def _require_teacher(config: "ExperimentConfig") -> "Model":
    teacher = _load_network(config.teacher.checkpoint, "teacher", "teacher")
    if teacher is None:
        output.print_error(
            f"Method {config.method.name!r} needs a pretrained teacher",
            "Run 'ktan train-teacher' and set teacher.checkpoint.",
        )
        raise typer.Exit(1)
    return teacher


def _write_json(path: Path, data: dict[str, Any]) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _train(config: "ExperimentConfig", method: str, overwrite: bool) -> None:
    """Shared body of `train` and `train-teacher`."""
    from src.cli.config import render_reference_config, to_train_config
    from src.training.artifacts import load_regressor, regressor_checkpoint, save_model
    from src.training.compare import write_summary
    from src.training.experiment import ExperimentError, run_experiment
    from src.training.ktan import TrainingAbortedError
    from src.utils.checkpoint import CheckpointError, save_checkpoint
    from src.utils.logging import MetricsLogger

    cfg = to_train_config(config, method)
    train_split, test_split = _load_datasets(config)

    teacher: Optional["Model"] = None
    regressor: Optional["Regressor"] = None
    student_init: Optional["Model"] = None
    if cfg.needs_teacher:
        teacher = _require_teacher(config)
        if cfg.needs_regressor and config.regressor.checkpoint is not None:
            try:
                regressor = load_regressor(Path(config.regressor.checkpoint))
            except (CheckpointError, OSError) as e:
                output.print_error(f"Cannot load regressor checkpoint {config.regressor.checkpoint}", str(e))
                raise typer.Exit(1)
    if method != "teacher":
        student_init = _load_network(config.student.checkpoint, "student", "student")

    out_dir = prepare_output_dir(Path(config.output.directory), overwrite)
    (out_dir / "config.yaml").write_text(render_reference_config(config), encoding="utf-8")

    try:
        result = run_experiment(
            cfg,
            train_split,
            test_split,
            teacher=teacher,
            regressor=regressor,
            student_init=student_init,
            metrics=MetricsLogger(out_dir),
            teacher_architecture=config.teacher.architecture,
            student_architecture=config.student.architecture,
        )
    except TrainingAbortedError as e:
        output.print_error("Training aborted", str(e))
        raise typer.Exit(EXIT_NON_FINITE)
    except ExperimentError as e:
        output.print_error("Cannot start training", str(e))
        raise typer.Exit(1)

    role = "teacher" if method == "teacher" else "student"
    checkpoint = out_dir / f"{role}.ckpt"
    result.summary.checkpoint = checkpoint.name
    save_model(
        checkpoint,
        role,
        result.model,
        result.optimizer,
        cursor={"phase": "eval", "iteration": result.summary.steps, "epoch": result.summary.epochs},
        config_hash=result.summary.config_hash,
        summary=result.summary.to_dict(),
    )
    if result.regressor is not None and regressor is None:
        save_checkpoint(
            regressor_checkpoint(result.regressor, result.summary.config_hash),
            out_dir / "regressor.ckpt",
        )
    write_summary(out_dir / "summary.json", result)
    output.print_run_summary(result.summary, out_dir)


@app.command()
def train(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Path to config file"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Override the config's seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
    overwrite: bool = typer.Option(False, "--overwrite", help="Replace an existing output directory"),
) -> None:
    """Train with the configured method.

    Writes metrics.jsonl, timings.jsonl, summary.json, config.yaml and the
    final checkpoint to the output directory.
    """
    config = get_config(config_path, seed, out)
    _train(config, config.method.name, overwrite)


@app.command("train-teacher")
def train_teacher(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Path to config file"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Override the config's seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
    overwrite: bool = typer.Option(False, "--overwrite", help="Replace an existing output directory"),
) -> None:
    """Train the teacher network on labels alone (teacher.epochs epochs)."""
    config = get_config(config_path, seed, out)
    _train(config, "teacher", overwrite)


@app.command("train-regressor")
def train_regressor_command(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Path to config file"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Override the config's seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
    overwrite: bool = typer.Option(False, "--overwrite", help="Replace an existing output directory"),
) -> None:
    """Solve the regressor geometry and train it against the frozen teacher."""
    from src.cli.config import render_reference_config, to_train_config
    from src.nn.architectures import build_architecture
    from src.training.artifacts import regressor_checkpoint
    from src.training.experiment import ExperimentError, prepare_regressor
    from src.training.schedule import RunStreams
    from src.utils.checkpoint import save_checkpoint
    from src.utils.hashing import config_hash
    from src.utils.logging import MetricsLogger

    config = get_config(config_path, seed, out)
    cfg = to_train_config(config)
    teacher = _require_teacher(config)
    train_split, _ = _load_datasets(config)
    student_spec = build_architecture(
        config.student.architecture, train_split.image_shape, classes=train_split.class_count
    )

    out_dir = prepare_output_dir(Path(config.output.directory), overwrite)
    (out_dir / "config.yaml").write_text(render_reference_config(config), encoding="utf-8")
    metrics = MetricsLogger(out_dir)
    try:
        regressor = prepare_regressor(
            cfg, teacher, student_spec, train_split, RunStreams.from_seed(cfg.seed), metrics
        )
    except ExperimentError as e:
        output.print_error("Cannot build regressor", str(e))
        raise typer.Exit(1)

    losses = [r.losses["ce"] for r in metrics.phase_records("regressor")]
    summary = {
        "kernel": list(regressor.spec.kernel),
        "teacher_shape": list(regressor.spec.teacher_shape),
        "student_shape": list(regressor.spec.student_shape),
        "steps": len(losses),
        "initial_ce": losses[0] if losses else None,
        "final_ce": losses[-1] if losses else None,
        "checkpoint": "regressor.ckpt",
    }
    save_checkpoint(
        regressor_checkpoint(regressor, config_hash(cfg.to_dict()), summary),
        out_dir / "regressor.ckpt",
    )
    _write_json(out_dir / "summary.json", summary)
    kernel = "x".join(map(str, regressor.spec.kernel))
    output.print_success(f"Regressor trained: kernel {kernel}, checkpoint {out_dir / 'regressor.ckpt'}")


@app.command()
def gradcheck(
    seed: int = typer.Option(0, "--seed", min=0, help="Seed of the random test inputs"),
    eps: float = typer.Option(1e-5, "--eps", help="Central-difference step"),
    tolerance: float = typer.Option(1e-4, "--tolerance", help="Maximum relative error"),
) -> None:
    """Check every differentiable operation and loss against finite differences."""
    from src.tensor.gradcheck import composite_case, operator_cases, run_gradcheck
    from src.training.losses import loss_gradcheck_cases

    cases = [*operator_cases(seed), composite_case(seed), *loss_gradcheck_cases(seed)]
    results = run_gradcheck(cases, eps, tolerance)
    output.print_gradcheck(results)

    failed = [r.name for r in results if not r.passed]
    if failed:
        output.print_error(f"{len(failed)} gradient check(s) failed", ", ".join(failed))
        raise typer.Exit(1)
    output.print_success(f"All {len(results)} gradient checks passed")


@app.command()
def compare(
    config_dir: Path = typer.Option(
        ..., "--config-dir", help="Directory with one <method>.yaml per method"
    ),
    seeds: str = typer.Option("0,1,2,3,4", "--seeds", help="Comma-separated run seeds"),
    methods: Optional[str] = typer.Option(
        None, "--methods", help="Comma-separated subset of methods (default: all configs)"
    ),
    out: Path = typer.Option(Path("runs/compare"), "--out", "-o", help="Output directory"),
    overwrite: bool = typer.Option(False, "--overwrite", help="Replace an existing output directory"),
) -> None:
    """Run the method matrix over several seeds and report the accuracy ordering."""
    from src.cli.config import to_train_config
    from src.training.compare import run_comparison

    try:
        seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    except ValueError:
        output.print_error(f"Invalid --seeds value: {seeds}")
        raise typer.Exit(1)
    if not seed_list:
        output.print_error("No seeds given")
        raise typer.Exit(1)

    paths = sorted(config_dir.glob("*.yaml"))
    if not paths:
        output.print_error(f"No method configs found in {config_dir}")
        raise typer.Exit(1)

    configs = {}
    dataset_config = None
    for path in paths:
        config = get_config(path)
        configs[config.method.name] = to_train_config(config)
        if dataset_config is None or config.method.name == "teacher":
            dataset_config = config
    if methods:
        wanted = {m.strip() for m in methods.split(",") if m.strip()}
        missing = sorted(wanted - set(configs))
        if missing:
            output.print_error(f"No config for: {', '.join(missing)}")
            raise typer.Exit(1)
        configs = {m: c for m, c in configs.items() if m in wanted}
    if "teacher" not in configs and any(c.needs_teacher for c in configs.values()):
        output.print_error("Transfer methods need a teacher.yaml in the config directory")
        raise typer.Exit(1)

    assert dataset_config is not None
    train_split, test_split = _load_datasets(dataset_config)
    out_dir = prepare_output_dir(out, overwrite)

    with output.create_progress_bar() as progress:
        task = progress.add_task("Comparing...", total=len(configs) * len(seed_list))

        def progress_callback(current: int, total: int, message: str) -> None:
            progress.update(task, completed=current, total=total, description=message[:50])

        report = run_comparison(configs, train_split, test_split, seed_list, out_dir, progress_callback)

    report.write_json(out_dir / "report.json")
    output.console.print()
    output.print_comparison(report)
    output.console.print(f"\n[dim]Report written to {out_dir / 'report.json'}[/dim]")


@app.command("eval")
def eval_command(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Teacher or student checkpoint"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Config naming the dataset"),
) -> None:
    """Evaluate a checkpoint on the configured test split."""
    from src.training.artifacts import restore_model
    from src.training.evaluation import evaluate
    from src.utils.checkpoint import CheckpointError, load_checkpoint

    config = get_config(config_path)
    try:
        ckpt = load_checkpoint(checkpoint)
        model = restore_model(ckpt)
    except (CheckpointError, OSError) as e:
        output.print_error(f"Cannot load checkpoint {checkpoint}", str(e))
        raise typer.Exit(1)

    _, test_split = _load_datasets(config)
    if tuple(model.spec.input_shape) != test_split.image_shape:
        output.print_error(
            f"Checkpoint expects inputs {model.spec.input_shape}, dataset images are {test_split.image_shape}"
        )
        raise typer.Exit(1)
    accuracy = evaluate(model.state, model.spec, test_split)

    output.console.print(
        f"[bold]{ckpt.role}[/bold] ({model.spec.name}) test accuracy: "
        f"[green]{accuracy * 100:.2f}%[/green] ({accuracy!r})"
    )
    recorded = ckpt.metadata.get("summary", {}).get("final_test_accuracy")
    if recorded is not None:
        if abs(recorded - accuracy) <= 1e-12:
            output.console.print("[dim]Matches the accuracy recorded at training time.[/dim]")
        else:
            output.print_warning(f"Recorded accuracy was {recorded!r}")


@app.command("init-config")
def init_config(
    path: Path = typer.Argument(Path("config.yaml"), help="Where to write the reference config"),
    overwrite: bool = typer.Option(False, "--overwrite", help="Replace an existing file"),
) -> None:
    """Write the documented reference configuration."""
    from src.cli.config import create_default_config

    if path.exists() and not overwrite:
        output.print_error(f"{path} already exists", "Pass --overwrite to replace it.")
        raise typer.Exit(1)
    create_default_config(path)
    output.print_success(f"Reference configuration written to {path}")


if __name__ == "__main__":
    app()
