"""
Forward and backward passes for the layer types of the coefficient regressor.

Every function works on a single example (no batch axis): feature maps are
(channels, rows, cols), vectors are 1-D. Backward functions take the forward
inputs plus the upstream gradient and return gradients for the inputs and any
parameters.
"""

from __future__ import annotations

import numpy as np

LEAKY_SLOPE = 0.1
KERNEL = 3
STRIDE = 2
PAD = 1


def _kernel_slices(out_rows: int, out_cols: int):
    for kr in range(KERNEL):
        for kc in range(KERNEL):
            yield kr, kc, slice(kr, kr + STRIDE * out_rows, STRIDE), slice(kc, kc + STRIDE * out_cols, STRIDE)


def conv_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """3x3, stride 2, zero padding 1: (C_in, H, W) -> (C_out, H/2, W/2)."""
    _, rows, cols = x.shape
    out_rows, out_cols = (rows + 2 * PAD - KERNEL) // STRIDE + 1, (cols + 2 * PAD - KERNEL) // STRIDE + 1
    padded = np.pad(x, ((0, 0), (PAD, PAD), (PAD, PAD)))
    # (C_in, 9, H', W') patches, flattened to match weight.reshape(C_out, C_in * 9).
    patches = np.stack([padded[:, rs, cs] for _, _, rs, cs in _kernel_slices(out_rows, out_cols)], axis=1)
    out = weight.reshape(weight.shape[0], -1) @ patches.reshape(-1, out_rows * out_cols)
    return out.reshape(weight.shape[0], out_rows, out_cols) + bias[:, np.newaxis, np.newaxis]


def conv_backward(x: np.ndarray, weight: np.ndarray, d_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (d_x, d_weight, d_bias)."""
    _, out_rows, out_cols = d_out.shape
    padded = np.pad(x, ((0, 0), (PAD, PAD), (PAD, PAD)))
    d_padded = np.zeros_like(padded)
    d_weight = np.zeros_like(weight)
    for kr, kc, rs, cs in _kernel_slices(out_rows, out_cols):
        d_weight[:, :, kr, kc] = np.einsum("ohw,chw->oc", d_out, padded[:, rs, cs])
        d_padded[:, rs, cs] += np.einsum("oc,ohw->chw", weight[:, :, kr, kc], d_out)
    d_x = d_padded[:, PAD:-PAD, PAD:-PAD]
    return d_x, d_weight, d_out.sum(axis=(1, 2))


def leaky_relu_forward(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def leaky_relu_backward(x: np.ndarray, d_out: np.ndarray) -> np.ndarray:
    return np.where(x > 0, d_out, LEAKY_SLOPE * d_out)


def gap_forward(x: np.ndarray) -> np.ndarray:
    """Global average pooling: per-channel spatial mean."""
    return x.mean(axis=(1, 2))


def gap_backward(x: np.ndarray, d_out: np.ndarray) -> np.ndarray:
    _, rows, cols = x.shape
    return np.broadcast_to(d_out[:, np.newaxis, np.newaxis] / (rows * cols), x.shape).copy()


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``weight`` has shape (out, in)."""
    return weight @ x + bias


def dense_backward(x: np.ndarray, weight: np.ndarray, d_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return weight.T @ d_out, np.outer(d_out, x), d_out.copy()
