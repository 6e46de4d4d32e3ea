"""Utility modules for logging, hashing, checkpoints and the run manifest."""

from src.utils.hashing import compute_sha256, config_hash, hash_arrays, hash_parameters
from src.utils.manifest import RunManifest

__all__ = [
    "compute_sha256",
    "config_hash",
    "hash_arrays",
    "hash_parameters",
    "RunManifest",
]
