"""In-memory datasets and their binary file format.

File layout (little-endian):

    magic      4 bytes  b"KTDS"
    version    u16
    K, M, C, H, W       u32 each
    precision  u8       0 = single, 1 = double
    meta_len   u32
    labels     M x int32
    images     M*C*H*W floats of the declared precision, row-major
    metadata   meta_len bytes of canonical JSON (split, provenance)
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.utils.logging import logger

MAGIC = b"KTDS"
VERSION = 1
_HEADER = struct.Struct("<4sH5IBI")
_PRECISION_CODES = {"single": 0, "double": 1}
_IMAGE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
SPLITS = ("train", "test")


class DatasetError(Exception):
    """Raised when a dataset violates its invariants."""

    pass


class DatasetFormatError(DatasetError):
    """Raised when a dataset file is malformed."""

    pass


class DatasetTruncatedError(DatasetFormatError):
    """Raised when a dataset file is shorter than its header declares."""

    pass


@dataclass(frozen=True)
class Dataset:
    """Labelled images of one split.

    Attributes:
        images: Read-only array [M, C, H, W] with values in [0, 1].
        labels: Read-only integer array [M] with values in [0, class_count).
        class_count: Number of classes K.
        split: "train" or "test".
        provenance: Generator spec and seed, or source path.
    """

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str = "train"
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.labels.dtype != np.int64:
            object.__setattr__(self, "labels", self.labels.astype(np.int64))
        if self.images.ndim != 4:
            raise DatasetError(f"images must be [M, C, H, W], got shape {self.images.shape}")
        if self.images.dtype not in (np.float32, np.float64):
            raise DatasetError(f"images must be float32 or float64, got {self.images.dtype}")
        if self.labels.shape != (self.images.shape[0],):
            raise DatasetError(
                f"{self.images.shape[0]} images but labels have shape {self.labels.shape}"
            )
        if self.class_count < 2:
            raise DatasetError(f"class_count must be >= 2, got {self.class_count}")
        if self.split not in SPLITS:
            raise DatasetError(f"split must be one of {SPLITS}, got {self.split!r}")
        if len(self):
            if self.labels.min() < 0 or self.labels.max() >= self.class_count:
                raise DatasetError(f"labels outside [0, {self.class_count})")
            if not np.isfinite(self.images).all():
                raise DatasetError("images contain NaN or Inf")
            if self.images.min() < 0.0 or self.images.max() > 1.0:
                raise DatasetError("image values outside [0, 1]")
        self.images.flags.writeable = False
        self.labels.flags.writeable = False

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        """(C, H, W) of one sample."""
        c, h, w = self.images.shape[1:]
        return (int(c), int(h), int(w))

    @property
    def precision(self) -> str:
        """Either "single" or "double"."""
        return "double" if self.images.dtype == np.float64 else "single"

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Dataset restricted to the given sample indices."""
        return Dataset(
            np.array(self.images[indices]),
            np.array(self.labels[indices]),
            self.class_count,
            self.split,
            dict(self.provenance),
        )

    def label_histogram(self) -> list[int]:
        """Sample count per class."""
        return [int(c) for c in np.bincount(self.labels, minlength=self.class_count)]


def save_dataset(dataset: Dataset, path: Path) -> None:
    """Write a dataset in the binary format described in the module docstring.

    Args:
        dataset: Dataset to write.
        path: Destination file; parent directories are created.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    code = _PRECISION_CODES[dataset.precision]
    meta = json.dumps(
        {"split": dataset.split, "provenance": dataset.provenance},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    m, c, h, w = dataset.images.shape
    header = _HEADER.pack(MAGIC, VERSION, dataset.class_count, m, c, h, w, code, len(meta))
    with open(path, "wb") as f:
        f.write(header)
        f.write(dataset.labels.astype("<i4").tobytes())
        f.write(dataset.images.astype(_IMAGE_DTYPES[code]).tobytes())
        f.write(meta)
    logger.debug(f"Saved {dataset.split} dataset ({m} samples) to {path}")


def load_dataset(path: Path) -> Dataset:
    """Read a dataset written by `save_dataset`.

    Raises:
        DatasetFormatError: On bad magic, unsupported version or precision code.
        DatasetTruncatedError: If the file is shorter than the header declares.
        DatasetError: If the decoded data violates the dataset invariants.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetTruncatedError(
            f"{path}: expected at least {_HEADER.size} header bytes, found {len(raw)}"
        )
    magic, version, k, m, c, h, w, code, meta_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic bytes {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported dataset version {version}")
    if code not in _IMAGE_DTYPES:
        raise DatasetFormatError(f"{path}: unknown precision code {code}")

    image_dtype = _IMAGE_DTYPES[code]
    label_bytes = 4 * m
    image_bytes = image_dtype.itemsize * m * c * h * w
    expected = _HEADER.size + label_bytes + image_bytes + meta_len
    if len(raw) < expected:
        raise DatasetTruncatedError(f"{path}: expected {expected} bytes, found {len(raw)}")
    if len(raw) > expected:
        raise DatasetFormatError(f"{path}: {len(raw) - expected} trailing bytes")

    offset = _HEADER.size
    labels = np.frombuffer(raw, dtype="<i4", count=m, offset=offset).astype(np.int64)
    offset += label_bytes
    images = (
        np.frombuffer(raw, dtype=image_dtype, count=m * c * h * w, offset=offset)
        .reshape(m, c, h, w)
        .astype(image_dtype.newbyteorder("="))
    )
    offset += image_bytes
    try:
        meta = json.loads(raw[offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DatasetFormatError(f"{path}: corrupt metadata block: {e}") from e
    return Dataset(images, labels, k, meta.get("split", "train"), meta.get("provenance", {}))
