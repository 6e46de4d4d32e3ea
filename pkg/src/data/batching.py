"""Seeded mini-batch iteration."""

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from src.data.dataset import Dataset, DatasetError


@dataclass(frozen=True)
class Batch:
    """One mini-batch."""

    images: np.ndarray
    labels: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def steps_per_epoch(samples: int, batch_size: int) -> int:
    """Number of batches in one epoch, counting the final partial batch."""
    return -(-samples // batch_size)


def batcher(
    dataset: Dataset,
    batch_size: int,
    seed: int,
    epoch: int = 0,
    shuffle: bool = True,
) -> Iterator[Batch]:
    """Yield the batches of one epoch.

    The order is a permutation drawn from (seed, epoch), so every epoch is
    reproducible on its own. The final batch may be smaller than `batch_size`.

    Raises:
        DatasetError: If the dataset is empty.
        ValueError: If batch_size < 1.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if len(dataset) == 0:
        raise DatasetError(f"Cannot batch an empty {dataset.split} dataset")
    if shuffle:
        order = np.random.default_rng([seed, epoch]).permutation(len(dataset))
    else:
        order = np.arange(len(dataset))
    for start in range(0, len(dataset), batch_size):
        indices = order[start : start + batch_size]
        yield Batch(dataset.images[indices], dataset.labels[indices], indices)
