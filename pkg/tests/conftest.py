"""Pytest configuration and shared fixtures."""

from pathlib import Path

import numpy as np
import pytest

from src.data.dataset import Dataset
from src.data.synthetic import SyntheticSpec, generate_synthetic
from src.training.config import TrainConfig


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_spec() -> SyntheticSpec:
    """A small synthetic dataset spec that trains in seconds."""
    return SyntheticSpec(
        classes=3,
        samples_per_class=8,
        test_samples_per_class=4,
        image_size=8,
        channels=1,
        noise=0.05,
    )


@pytest.fixture(scope="session")
def tiny_splits(tiny_spec: SyntheticSpec) -> tuple[Dataset, Dataset]:
    """Train/test splits of the tiny spec (24 and 12 images of 1x8x8)."""
    return generate_synthetic(tiny_spec, seed=7)


@pytest.fixture
def tiny_config() -> TrainConfig:
    """Short run settings for the tiny dataset: 2 epochs of 3 steps."""
    return TrainConfig(
        method="student",
        seed=3,
        epochs=2,
        batch_size=8,
        lr_main=0.02,
        lr_adversarial=0.01,
        regressor_steps=2,
    )


@pytest.fixture
def temp_manifest_path(tmp_path: Path) -> Path:
    """Create a temporary manifest path for testing."""
    return tmp_path / "runs.json"


# Markers for test categories
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "integration: marks tests as end-to-end runs through the CLI"
    )
    config.addinivalue_line(
        "markers", "slow: marks tests as slow running (multi-seed reproductions)"
    )
