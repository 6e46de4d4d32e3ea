"""Versioned binary checkpoint container.

Layout (little-endian):

    magic       4 bytes  b"KTCK"
    version     u16
    header_len  u32
    header      canonical JSON (sorted keys): role, metadata and a tensor
                directory of {name, dtype, shape, offset, nbytes}
    blob        raw tensor bytes in directory order
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.utils.logging import logger

MAGIC = b"KTCK"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class CheckpointError(Exception):
    """Raised when a checkpoint cannot be written or read."""

    pass


@dataclass
class Checkpoint:
    """Named arrays plus JSON-serializable metadata.

    Attributes:
        role: What the checkpoint holds ("teacher", "student", "regressor").
        tensors: Arrays keyed by name.
        metadata: Plain data such as the network spec, frozen groups,
            training cursor, config hash and run summary.
    """

    role: str
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def section(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays whose names start with "<prefix>/", with the prefix removed."""
        marker = f"{prefix}/"
        return {n[len(marker) :]: a for n, a in self.tensors.items() if n.startswith(marker)}


def _canonical(data: Any) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Serialize a checkpoint to bytes."""
    directory = []
    chunks = []
    offset = 0
    for name in sorted(checkpoint.tensors):
        array = np.ascontiguousarray(checkpoint.tensors[name])
        array = array.astype(array.dtype.newbyteorder("<"), copy=False)
        raw = array.tobytes()
        directory.append(
            {
                "name": name,
                "dtype": array.dtype.str,
                "shape": list(array.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    try:
        header = _canonical(
            {"role": checkpoint.role, "metadata": checkpoint.metadata, "tensors": directory}
        )
    except (TypeError, ValueError) as e:
        raise CheckpointError(f"Checkpoint metadata is not serializable: {e}") from e
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + b"".join(chunks)


def decode_checkpoint(raw: bytes, source: str = "checkpoint") -> Checkpoint:
    """Parse bytes produced by `encode_checkpoint`.

    Raises:
        CheckpointError: On bad magic, version mismatch or truncation.
    """
    if len(raw) < _PREFIX.size:
        raise CheckpointError(f"{source}: file too short ({len(raw)} bytes)")
    magic, version, header_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: bad magic bytes {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointError(
            f"{source}: checkpoint version {version} is not supported (expected {VERSION})"
        )
    body = _PREFIX.size + header_len
    if len(raw) < body:
        raise CheckpointError(f"{source}: header truncated")
    try:
        header = json.loads(raw[_PREFIX.size : body].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source}: corrupt header: {e}") from e

    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start = body + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(raw):
            raise CheckpointError(
                f"{source}: tensor {entry['name']} needs bytes up to {end}, file has {len(raw)}"
            )
        dtype = np.dtype(entry["dtype"])
        array = np.frombuffer(raw[start:end], dtype=dtype).reshape(entry["shape"])
        tensors[entry["name"]] = array.astype(dtype.newbyteorder("="))
    return Checkpoint(header["role"], tensors, header["metadata"])


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> None:
    """Write a checkpoint file, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint))
    logger.debug(f"Saved {checkpoint.role} checkpoint to {path}")


def load_checkpoint(path: Path, role: str | None = None) -> Checkpoint:
    """Read a checkpoint file.

    Args:
        path: Checkpoint file.
        role: Expected role; a mismatch raises CheckpointError.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    checkpoint = decode_checkpoint(path.read_bytes(), str(path))
    if role is not None and checkpoint.role != role:
        raise CheckpointError(f"{path}: expected a {role} checkpoint, found {checkpoint.role}")
    return checkpoint
