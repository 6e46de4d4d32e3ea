"""Deterministic synthetic shape datasets."""

from collections.abc import Callable
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from src.data.dataset import Dataset, DatasetError
from src.utils.logging import logger

Mask = Callable[[np.ndarray, np.ndarray, dict[str, float]], np.ndarray]


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic shape dataset."""

    classes: int = 4
    samples_per_class: int = 500
    test_samples_per_class: int = 100
    image_size: int = 16
    channels: int = 1
    noise: float = 0.15
    clutter: int = 2

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for serialization."""
        return asdict(self)


def _horizontal_bars(yy: np.ndarray, xx: np.ndarray, p: dict[str, float]) -> np.ndarray:
    return ((yy + p["phase"]) % p["period"]) < p["thickness"]


def _vertical_bars(yy: np.ndarray, xx: np.ndarray, p: dict[str, float]) -> np.ndarray:
    return ((xx + p["phase"]) % p["period"]) < p["thickness"]


def _ring(yy: np.ndarray, xx: np.ndarray, p: dict[str, float]) -> np.ndarray:
    dist = np.hypot(yy - p["cy"], xx - p["cx"])
    return np.abs(dist - p["radius"]) < 0.5 * p["thickness"] + 0.25


def _checkers(yy: np.ndarray, xx: np.ndarray, p: dict[str, float]) -> np.ndarray:
    cell = p["period"] - 1
    return (((yy + p["phase"]) // cell + (xx + p["phase"]) // cell) % 2) == 0


def _cross(yy: np.ndarray, xx: np.ndarray, p: dict[str, float]) -> np.ndarray:
    dy, dx = np.abs(yy - p["cy"]), np.abs(xx - p["cx"])
    half = 0.5 * p["thickness"]
    return ((dy <= half) & (dx <= p["radius"])) | ((dx <= half) & (dy <= p["radius"]))


def _square_outline(yy: np.ndarray, xx: np.ndarray, p: dict[str, float]) -> np.ndarray:
    extent = np.maximum(np.abs(yy - p["cy"]), np.abs(xx - p["cx"]))
    return (extent <= p["radius"]) & (extent > p["radius"] - p["thickness"])


def _diagonal_cross(yy: np.ndarray, xx: np.ndarray, p: dict[str, float]) -> np.ndarray:
    dy, dx = yy - p["cy"], xx - p["cx"]
    inside = np.maximum(np.abs(dy), np.abs(dx)) <= p["radius"]
    return inside & ((np.abs(dy - dx) < p["thickness"]) | (np.abs(dy + dx) < p["thickness"]))


def _disk(yy: np.ndarray, xx: np.ndarray, p: dict[str, float]) -> np.ndarray:
    return np.hypot(yy - p["cy"], xx - p["cx"]) <= p["radius"]


# Every family is mirror-symmetric, so horizontal flips never change the class.
# The outline families come first: ring vs. square outline and cross vs.
# diagonal cross differ only in fine spatial detail.
SHAPE_FAMILIES: list[tuple[str, Mask]] = [
    ("ring", _ring),
    ("square-outline", _square_outline),
    ("cross", _cross),
    ("diagonal-cross", _diagonal_cross),
    ("horizontal-bars", _horizontal_bars),
    ("vertical-bars", _vertical_bars),
    ("checkers", _checkers),
    ("disk", _disk),
]


def validate_spec(spec: SyntheticSpec) -> None:
    """Raise DatasetError if the spec cannot be rendered."""
    if not 2 <= spec.classes <= len(SHAPE_FAMILIES):
        raise DatasetError(f"classes must lie in [2, {len(SHAPE_FAMILIES)}], got {spec.classes}")
    if spec.image_size < 8:
        raise DatasetError(f"image_size must be >= 8, got {spec.image_size}")
    if spec.channels not in (1, 3):
        raise DatasetError(f"channels must be 1 or 3, got {spec.channels}")
    if spec.samples_per_class < 1 or spec.test_samples_per_class < 1:
        raise DatasetError("samples per class must be >= 1")
    if spec.noise < 0:
        raise DatasetError(f"noise must be >= 0, got {spec.noise}")
    if spec.clutter < 0:
        raise DatasetError(f"clutter must be >= 0, got {spec.clutter}")


def _clutter(size: int, strokes: int, rng: np.random.Generator) -> np.ndarray:
    """Short horizontal or vertical distractor strokes of 2-3 pixels."""
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(strokes):
        length = int(rng.integers(2, 4))
        y, x = (int(v) for v in rng.integers(0, size - length + 1, size=2))
        if rng.random() < 0.5:
            mask[y, x : x + length] = True
        else:
            mask[y : y + length, x] = True
    return mask


def _render(spec: SyntheticSpec, label: int, rng: np.random.Generator) -> np.ndarray:
    size = spec.image_size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    centre = (size - 1) / 2
    jitter = size / 6
    params = {
        "cy": centre + rng.uniform(-jitter, jitter),
        "cx": centre + rng.uniform(-jitter, jitter),
        "radius": rng.uniform(0.25, 0.4) * size,
        "thickness": float(rng.integers(1, 3)),
        "period": float(rng.integers(3, 6)),
        "phase": float(rng.integers(0, 6)),
    }
    mask = SHAPE_FAMILIES[label][1](yy, xx, params).astype(np.float64)
    background = rng.uniform(0.0, 0.2)
    foreground = rng.uniform(0.5, 0.9)
    # Distractors are dimmer than the shape and never erase it.
    distractors = _clutter(size, spec.clutter, rng).astype(np.float64) * rng.uniform(0.4, 0.8)
    mask = np.maximum(mask, distractors)
    gains = rng.uniform(0.5, 1.0, size=spec.channels) if spec.channels > 1 else np.ones(1)
    image = background + (foreground - background) * mask[None] * gains[:, None, None]
    image = image + spec.noise * rng.standard_normal(image.shape)
    return np.clip(image, 0.0, 1.0)


def _generate_split(
    spec: SyntheticSpec,
    per_class: int,
    split: str,
    rng: np.random.Generator,
    provenance: dict[str, Any],
) -> Dataset:
    labels = np.repeat(np.arange(spec.classes), per_class)
    images = np.stack([_render(spec, int(label), rng) for label in labels])
    order = rng.permutation(labels.size)
    return Dataset(
        images[order].astype(np.float32),
        labels[order],
        spec.classes,
        split,
        provenance,
    )


def generate_synthetic(spec: SyntheticSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Render a (train, test) pair of shape datasets.

    Each class is one shape family drawn with a random offset, size, line
    thickness and intensity, plus `spec.clutter` dim distractor strokes and
    additive Gaussian noise. The two splits use independent random streams
    derived from `seed`.

    Args:
        spec: Dataset parameters.
        seed: Generator seed.

    Returns:
        (train, test) datasets, label histograms exactly uniform.

    Raises:
        DatasetError: If the spec is infeasible.
    """
    validate_spec(spec)
    train_stream, test_stream = np.random.SeedSequence(seed).spawn(2)
    provenance = {
        "generator": "synthetic-shapes",
        "families": [name for name, _ in SHAPE_FAMILIES[: spec.classes]],
        "spec": spec.to_dict(),
        "seed": seed,
    }
    train = _generate_split(
        spec, spec.samples_per_class, "train", np.random.default_rng(train_stream), provenance
    )
    test = _generate_split(
        spec, spec.test_samples_per_class, "test", np.random.default_rng(test_stream), provenance
    )
    logger.debug(
        f"Generated synthetic dataset: {len(train)} train / {len(test)} test, "
        f"{spec.classes} classes, {spec.image_size}x{spec.image_size}"
    )
    return train, test
