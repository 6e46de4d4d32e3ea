"""Random horizontal flips and padded random crops."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AugmentConfig:
    """Training-time augmentation settings."""

    horizontal_flip_probability: float = 0.5
    crop_padding: int = 2
    enabled: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.horizontal_flip_probability <= 1.0:
            raise ValueError(
                f"horizontal_flip_probability must lie in [0, 1], "
                f"got {self.horizontal_flip_probability}"
            )
        if self.crop_padding < 0:
            raise ValueError(f"crop_padding must be >= 0, got {self.crop_padding}")

    @property
    def is_identity(self) -> bool:
        """True when augmentation cannot change a batch."""
        return not self.enabled or (
            self.horizontal_flip_probability == 0.0 and self.crop_padding == 0
        )


def augment_batch(
    images: np.ndarray,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    crop_offsets: np.ndarray | None = None,
) -> np.ndarray:
    """Flip and crop each sample independently.

    Each image is mirrored left-right with probability p, zero-padded by
    `crop_padding` on every side, then cropped back to its original size at a
    uniformly random offset.

    Args:
        images: Batch [N, C, H, W].
        cfg: Augmentation settings.
        rng: Random stream; consumed identically for a given batch size.
        crop_offsets: Optional fixed [N, 2] (row, column) offsets into the padded image.

    Returns:
        Augmented copy of the batch (or the input itself for an identity config).
    """
    if cfg.is_identity:
        return images
    n, _, height, width = images.shape
    pad = cfg.crop_padding

    flips = rng.random(n) < cfg.horizontal_flip_probability
    if crop_offsets is None:
        crop_offsets = rng.integers(0, 2 * pad + 1, size=(n, 2))

    out = np.array(images)
    out[flips] = out[flips][..., ::-1]
    if pad:
        padded = np.pad(out, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        for index, (top, left) in enumerate(crop_offsets):
            out[index] = padded[index, :, top : top + height, left : left + width]
    return out
