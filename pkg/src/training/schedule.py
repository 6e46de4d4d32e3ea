"""Random streams and the step-driven batch stream shared by all training loops."""

from collections.abc import Iterator
from dataclasses import dataclass
from itertools import islice

import numpy as np

from src.data.augment import AugmentConfig, augment_batch
from src.data.batching import batcher, steps_per_epoch
from src.data.dataset import Dataset
from src.tensor.tensor import Tensor

_STREAMS = ("init", "discriminator", "regressor", "augment", "hint")


@dataclass
class RunStreams:
    """Independent random generators per purpose, derived from one run seed.

    Adding a consumer of one stream never shifts the values drawn by another,
    which keeps reduced methods on the same trajectory as their full form.
    """

    seed: int
    init: np.random.Generator
    discriminator: np.random.Generator
    regressor: np.random.Generator
    augment: np.random.Generator
    hint: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RunStreams":
        """Spawn one child sequence per purpose."""
        children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
        generators = {name: np.random.default_rng(c) for name, c in zip(_STREAMS, children)}
        return cls(seed=seed, **generators)


@dataclass(frozen=True)
class Step:
    """One training step's batch."""

    index: int
    epoch: int
    images: Tensor
    labels: np.ndarray
    last_in_epoch: bool


class BatchStream:
    """Endless sequence of (optionally augmented) training batches.

    Epoch e is the batch order drawn from (seed, e); augmentation is applied
    once per batch, so every network that consumes a step sees the same images.
    """

    def __init__(
        self,
        dataset: Dataset,
        batch_size: int,
        seed: int,
        augment: AugmentConfig | None = None,
        augment_rng: np.random.Generator | None = None,
        precision: str = "single",
    ) -> None:
        self.dataset = dataset
        self.batch_size = batch_size
        self.seed = seed
        self.augment = augment if augment is not None else AugmentConfig(enabled=False)
        self.augment_rng = augment_rng if augment_rng is not None else np.random.default_rng(seed)
        self.precision = precision
        self.steps_per_epoch = steps_per_epoch(len(dataset), batch_size)

    def __iter__(self) -> Iterator[Step]:
        index = 0
        epoch = 0
        while True:
            batches = list(batcher(self.dataset, self.batch_size, self.seed, epoch))
            for position, batch in enumerate(batches):
                images = batch.images
                if self.dataset.split == "train":
                    images = augment_batch(images, self.augment, self.augment_rng)
                yield Step(
                    index=index,
                    epoch=epoch,
                    images=Tensor(images, dtype=self.precision),
                    labels=batch.labels,
                    last_in_epoch=position == len(batches) - 1,
                )
                index += 1
            epoch += 1

    def take(self, steps: int) -> Iterator[Step]:
        """The first `steps` steps."""
        return islice(iter(self), max(steps, 0))
