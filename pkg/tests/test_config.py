"""Tests for configuration loading."""

from pathlib import Path

import pytest

from src.cli.config import (
    ConfigError,
    ExperimentConfig,
    create_default_config,
    load_config,
    load_datasets,
    parse_config_text,
    render_reference_config,
    synthetic_spec,
    to_train_config,
    validate_config,
)


class TestParseConfig:
    """Tests for parse_config_text."""

    def test_empty_document_gives_defaults(self):
        """Test that an empty file is the default configuration."""
        assert parse_config_text("") == ExperimentConfig()

    def test_sections(self):
        """Test parsing nested sections."""
        config = parse_config_text(
            "seed: 4\n"
            "method:\n"
            "  name: dln\n"
            "  beta: 1\n"
            "optimizer:\n"
            "  decay_epochs: [5, 10]\n"
            "adversarial:\n"
            "  k_pretrain_steps: null\n"
        )
        assert config.seed == 4
        assert config.method.name == "dln"
        assert config.method.beta == 1.0
        assert isinstance(config.method.beta, float)
        assert config.optimizer.decay_epochs == [5, 10]
        assert config.adversarial.k_pretrain_steps is None

    def test_unknown_key_reports_path_and_line(self):
        """Test that a misspelled key names its dotted path and line."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text("seed: 0\nmethod:\n  name: ktan\n  alhpa: 0.5\n")
        assert excinfo.value.key == "method.alhpa"
        assert excinfo.value.line == 4
        assert "method.alhpa" in str(excinfo.value)

    def test_unknown_section(self):
        """Test that an unknown top-level key is rejected."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text("metod:\n  name: ktan\n")
        assert excinfo.value.key == "metod"
        assert excinfo.value.line == 1

    @pytest.mark.parametrize(
        "text,key",
        [
            ("seed: true\n", "seed"),
            ("seed: 1.5\n", "seed"),
            ("method:\n  alpha: fast\n", "method.alpha"),
            ("method:\n  kd_t_squared: 1\n", "method.kd_t_squared"),
            ("optimizer:\n  decay_epochs: 5\n", "optimizer.decay_epochs"),
            ("dataset: 3\n", "dataset"),
        ],
    )
    def test_type_errors(self, text, key):
        """Test that mistyped values are rejected with their key."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text(text)
        assert excinfo.value.key == key

    def test_yaml_syntax_error_has_line(self):
        """Test that YAML syntax errors carry a line number."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text("seed: 0\nmethod: [ktan\n")
        assert excinfo.value.line is not None


class TestLoadConfig:
    """Tests for load_config."""

    def test_defaults_without_file(self, tmp_path: Path, monkeypatch):
        """Test that no config file means defaults."""
        monkeypatch.chdir(tmp_path)
        assert load_config() == ExperimentConfig()

    def test_picks_up_config_yaml(self, tmp_path: Path, monkeypatch):
        """Test that config.yaml in the working directory is used."""
        monkeypatch.chdir(tmp_path)
        (tmp_path / "config.yaml").write_text("seed: 9\n", encoding="utf-8")
        assert load_config().seed == 9

    def test_missing_explicit_file(self, tmp_path: Path):
        """Test that an explicit missing path is an error."""
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml")


class TestReferenceConfig:
    """Tests for the generated reference configuration."""

    def test_roundtrip_defaults(self):
        """Test that the reference file parses back to the defaults."""
        assert parse_config_text(render_reference_config()) == ExperimentConfig()

    def test_roundtrip_custom(self):
        """Test that a customised configuration renders and parses back."""
        config = ExperimentConfig(seed=3)
        config.method.name = "ktan_kd"
        config.optimizer.decay_epochs = [2, 4]
        config.adversarial.iterations = 12
        config.teacher.checkpoint = "runs/teacher/teacher.ckpt"
        assert parse_config_text(render_reference_config(config)) == config

    def test_every_key_documented(self):
        """Test that each key is preceded by a comment line."""
        lines = render_reference_config().splitlines()
        for index, line in enumerate(lines):
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                assert lines[index - 1].strip().startswith("#"), line

    def test_create_default_config(self, tmp_path: Path):
        """Test writing the reference file."""
        path = tmp_path / "nested" / "config.yaml"
        create_default_config(path)
        assert load_config(path) == ExperimentConfig()


class TestValidateConfig:
    """Tests for validate_config and to_train_config."""

    def test_defaults_are_valid(self):
        """Test that the defaults validate."""
        assert validate_config(ExperimentConfig()) == []

    def test_invalid_method(self):
        """Test that an unknown method is reported."""
        config = ExperimentConfig()
        config.method.name = "distill"
        issues = validate_config(config)
        assert any("method.name" in issue for issue in issues)

    def test_paths_come_in_pairs(self):
        """Test that train and test paths must be set together."""
        config = ExperimentConfig()
        config.dataset.train_path = "train.ktds"
        assert any("train_path" in issue for issue in validate_config(config))

    def test_infeasible_synthetic_data(self):
        """Test that synthetic dataset problems are reported."""
        config = ExperimentConfig()
        config.dataset.image_size = 4
        assert any(issue.startswith("dataset:") for issue in validate_config(config))

    def test_clutter_reaches_the_generator(self):
        """Test that dataset.clutter is validated and passed to the synthetic spec."""
        config = ExperimentConfig()
        assert synthetic_spec(config).clutter == 2
        config.dataset.clutter = -1
        assert any("clutter" in issue for issue in validate_config(config))

    def test_unknown_architecture(self):
        """Test that architectures must be registered."""
        config = ExperimentConfig()
        config.student.architecture = "resnet-8"
        assert validate_config(config) == ["Unknown architecture: 'resnet-8'"]

    def test_train_config_mapping(self):
        """Test flattening sections into run hyperparameters."""
        config = ExperimentConfig(seed=5)
        config.teacher.epochs = 7
        config.method.epochs = 3
        config.adversarial.iterations = 11
        config.dataset.augment = False
        cfg = to_train_config(config)
        assert (cfg.method, cfg.seed, cfg.epochs) == ("ktan", 5, 3)
        assert cfg.adversarial_iterations == 11
        assert not cfg.augment.enabled
        assert to_train_config(config, "teacher").epochs == 7

    def test_synthetic_datasets(self):
        """Test that the dataset section drives the generator."""
        config = ExperimentConfig()
        config.dataset.classes = 2
        config.dataset.samples_per_class = 3
        config.dataset.test_samples_per_class = 2
        config.dataset.image_size = 8
        train, test = load_datasets(config)
        assert (len(train), len(test)) == (6, 4)


REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.mark.parametrize(
    "path",
    [REPO_ROOT / "config.example.yaml", *sorted((REPO_ROOT / "configs" / "desk").glob("*.yaml"))],
    ids=lambda p: p.name,
)
def test_shipped_configs_are_valid(path: Path):
    """Test that the example and comparison configs load and validate."""
    assert validate_config(load_config(path)) == []
