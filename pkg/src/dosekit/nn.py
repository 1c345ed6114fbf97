"""Minimal 3D conv-net layers with explicit reverse-mode gradients.

Everything operates on channel-first arrays (C, X, Y, Z) in the dtype of
the inputs.  Convolutions are stride-1 with same padding, computed as
im2col + one BLAS matmul; max pooling routes gradients to the first
maximum of each 2x2x2 window; trilinear upsampling is expressed as a dense
per-axis resize matrix so its backward pass is the exact transpose.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def conv3d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padding stride-1 convolution.  Returns (y, cache)."""
    c_out, c_in, k, _, _ = w.shape
    pad = k // 2
    if pad:
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (pad, pad)))
    else:
        xp = x
    spatial = x.shape[1:]
    n = int(np.prod(spatial))
    windows = sliding_window_view(xp, (k, k, k), axis=(1, 2, 3))
    cols = windows.transpose(0, 4, 5, 6, 1, 2, 3).reshape(c_in * k**3, n)
    cols = np.ascontiguousarray(cols)
    y = (w.reshape(c_out, -1) @ cols + b[:, None]).reshape((c_out,) + spatial)
    return y, (cols, x.shape, w.shape)


def conv3d_backward(gy: np.ndarray, w: np.ndarray, cache):
    """Gradients for input, weights, and bias of conv3d_forward."""
    cols, x_shape, w_shape = cache
    c_out, c_in, k, _, _ = w_shape
    pad = k // 2
    spatial = x_shape[1:]
    n = int(np.prod(spatial))

    g2 = gy.reshape(c_out, n)
    gw = (g2 @ cols.T).reshape(w_shape)
    gb = g2.sum(axis=1)

    gcols = (w.reshape(c_out, -1).T @ g2).reshape((c_in, k, k, k) + spatial)
    gxp = np.zeros((c_in,) + tuple(s + 2 * pad for s in spatial), dtype=gy.dtype)
    sx, sy, sz = spatial
    for dx in range(k):
        for dy in range(k):
            for dz in range(k):
                gxp[:, dx:dx + sx, dy:dy + sy, dz:dz + sz] += gcols[:, dx, dy, dz]
    if pad:
        gx = gxp[:, pad:-pad, pad:-pad, pad:-pad]
    else:
        gx = gxp
    return np.ascontiguousarray(gx), gw, gb


# ---------------------------------------------------------------------------
# ReLU
# ---------------------------------------------------------------------------

def relu_forward(x: np.ndarray):
    y = np.maximum(x, 0.0)
    return y, x > 0


def relu_backward(gy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return gy * mask


# ---------------------------------------------------------------------------
# Dropout (inverted scaling; identity when rate == 0)
# ---------------------------------------------------------------------------

def dropout_forward(x: np.ndarray, rate: float, rng: np.random.Generator):
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * keep, keep


def dropout_backward(gy: np.ndarray, keep: np.ndarray) -> np.ndarray:
    return gy * keep


# ---------------------------------------------------------------------------
# 2x max pooling
# ---------------------------------------------------------------------------

def maxpool2_forward(x: np.ndarray):
    c, sx, sy, sz = x.shape
    win = (
        x.reshape(c, sx // 2, 2, sy // 2, 2, sz // 2, 2)
        .transpose(0, 1, 3, 5, 2, 4, 6)
        .reshape(c, sx // 2, sy // 2, sz // 2, 8)
    )
    arg = win.argmax(axis=-1)  # first max wins on ties
    y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return y, (arg, x.shape)


def maxpool2_backward(gy: np.ndarray, cache) -> np.ndarray:
    arg, x_shape = cache
    c, sx, sy, sz = x_shape
    g8 = np.zeros((c, sx // 2, sy // 2, sz // 2, 8), dtype=gy.dtype)
    np.put_along_axis(g8, arg[..., None], gy[..., None], axis=-1)
    return (
        g8.reshape(c, sx // 2, sy // 2, sz // 2, 2, 2, 2)
        .transpose(0, 1, 4, 2, 5, 3, 6)
        .reshape(x_shape)
    )


# ---------------------------------------------------------------------------
# Trilinear 2x upsampling
# ---------------------------------------------------------------------------

_UPSAMPLE_CACHE: dict[int, np.ndarray] = {}


def _upsample_matrix(n: int) -> np.ndarray:
    """Dense (2n, n) linear-interpolation matrix, edge samples clamped."""
    m = _UPSAMPLE_CACHE.get(n)
    if m is None:
        m = np.zeros((2 * n, n))
        for o in range(2 * n):
            c = (o + 0.5) / 2.0 - 0.5
            i0 = int(np.floor(c))
            w = c - i0
            lo = min(max(i0, 0), n - 1)
            hi = min(max(i0 + 1, 0), n - 1)
            m[o, lo] += 1.0 - w
            m[o, hi] += w
        _UPSAMPLE_CACHE[n] = m
    return m


def _apply_axis(x: np.ndarray, m: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(m.astype(x.dtype), x, axes=(1, axis))
    return np.ascontiguousarray(np.moveaxis(out, 0, axis))


def upsample2_forward(x: np.ndarray):
    y = x
    for axis in range(1, 4):
        y = _apply_axis(y, _upsample_matrix(x.shape[axis]), axis)
    return y, x.shape


def upsample2_backward(gy: np.ndarray, x_shape) -> np.ndarray:
    g = gy
    for axis in range(1, 4):
        g = _apply_axis(g, _upsample_matrix(x_shape[axis]).T, axis)
    return g
