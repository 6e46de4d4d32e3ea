"""Datasets, augmentation and batching."""

from src.data.augment import AugmentConfig, augment_batch
from src.data.batching import Batch, batcher, steps_per_epoch
from src.data.dataset import (
    Dataset,
    DatasetError,
    DatasetFormatError,
    DatasetTruncatedError,
    load_dataset,
    save_dataset,
)
from src.data.synthetic import SyntheticSpec, generate_synthetic

__all__ = [
    "AugmentConfig",
    "Batch",
    "Dataset",
    "DatasetError",
    "DatasetFormatError",
    "DatasetTruncatedError",
    "SyntheticSpec",
    "augment_batch",
    "batcher",
    "generate_synthetic",
    "load_dataset",
    "save_dataset",
    "steps_per_epoch",
]
