"""Reference implementations written as plain loops."""

import numpy as np

from src.tensor.geometry import ConvGeometry


def conv2d_reference(
    x: np.ndarray, filters: np.ndarray, bias: np.ndarray, geom: ConvGeometry
) -> np.ndarray:
    """Cross-correlation by six nested loops over the zero-padded input."""
    n, c, height, width = x.shape
    out_h = (height + 2 * geom.padding_h - geom.kernel_h) // geom.stride_h + 1
    out_w = (width + 2 * geom.padding_w - geom.kernel_w) // geom.stride_w + 1
    padded = np.zeros(
        (n, c, height + 2 * geom.padding_h, width + 2 * geom.padding_w), dtype=np.float64
    )
    padded[:, :, geom.padding_h : geom.padding_h + height, geom.padding_w : geom.padding_w + width] = x
    out = np.zeros((n, geom.out_channels, out_h, out_w), dtype=np.float64)
    for b in range(n):
        for o in range(geom.out_channels):
            for y in range(out_h):
                for xx in range(out_w):
                    total = bias[o]
                    for ch in range(c):
                        for i in range(geom.kernel_h):
                            for j in range(geom.kernel_w):
                                total += (
                                    padded[b, ch, y * geom.stride_h + i, xx * geom.stride_w + j]
                                    * filters[o, ch, i, j]
                                )
                    out[b, o, y, xx] = total
    return out


def dense_reference(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Dense layer as explicit dot products."""
    n, features = x.shape
    outputs = weights.shape[1]
    out = np.zeros((n, outputs), dtype=np.float64)
    for b in range(n):
        for o in range(outputs):
            out[b, o] = bias[o] + sum(x[b, f] * weights[f, o] for f in range(features))
    return out
