"""Hashing utilities for run reproducibility and parameter-isolation checks."""

import hashlib
import json
from collections.abc import Mapping
from typing import Any

import numpy as np


def compute_sha256(data: bytes) -> str:
    """Compute SHA-256 hash of data.

    Args:
        data: Bytes to hash.

    Returns:
        Hash string prefixed with "sha256:".
    """
    hash_obj = hashlib.sha256(data)
    return f"sha256:{hash_obj.hexdigest()}"


def hash_arrays(arrays: Mapping[str, np.ndarray]) -> str:
    """Hash named arrays by name, dtype, shape and raw bytes.

    Two mappings hash equal exactly when they hold bit-identical arrays
    under the same names.
    """
    hash_obj = hashlib.sha256()
    for name in sorted(arrays):
        array = np.ascontiguousarray(arrays[name])
        hash_obj.update(name.encode("utf-8"))
        hash_obj.update(str(array.dtype).encode("ascii"))
        hash_obj.update(repr(array.shape).encode("ascii"))
        hash_obj.update(array.tobytes())
    return f"sha256:{hash_obj.hexdigest()}"


def hash_parameters(parameters: Mapping[str, Any], prefix: str = "") -> str:
    """Hash a name -> Tensor mapping, optionally restricted to a name prefix."""
    return hash_arrays(
        {name: t.data for name, t in parameters.items() if name.startswith(prefix)}
    )


def config_hash(config: Mapping[str, Any]) -> str:
    """Hash a plain-data configuration via its canonical JSON form."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return compute_sha256(canonical.encode("utf-8"))


def short_hash(value: str, length: int = 8) -> str:
    """Shorten a "sha256:..." string for display purposes."""
    return value.split(":", 1)[-1][:length]
