"""Pure-numpy kernels: im2col windows + BLAS contractions.

All convolutions are cross-correlations (no kernel flip), NCHW layout,
weight layout (out_channels, in_channels, kh, kw). Padding must satisfy
0 <= pad <= k - 1; output sizes follow floor arithmetic, and the gradient
kernels reproduce the exact adjoints of ``conv2d_fwd``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _windows(x_padded: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    n, c, hp, wp = x_padded.shape
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    s0, s1, s2, s3 = x_padded.strides
    return as_strided(
        x_padded,
        shape=(n, c, kh, kw, oh, ow),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )


def conv2d_fwd(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = _windows(x, w.shape[2], w.shape[3], stride)
    y = np.tensordot(w, win, axes=([1, 2, 3], [1, 2, 3]))  # (Co, N, OH, OW)
    return np.ascontiguousarray(y.transpose(1, 0, 2, 3))


def conv2d_bwd_weight(
    x: np.ndarray, dy: np.ndarray, stride: int, pad: int, kh: int, kw: int
) -> np.ndarray:
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = _windows(x, kh, kw, stride)
    # dw[o,i,a,b] = sum_{n,oh,ow} x_pad[n,i,a+oh*s,b+ow*s] * dy[n,o,oh,ow]
    return np.tensordot(dy, win, axes=([0, 2, 3], [0, 4, 5]))


def conv2d_bwd_input(
    dy: np.ndarray, w: np.ndarray, stride: int, pad: int, h: int, w_in: int
) -> np.ndarray:
    n, co, oh, ow = dy.shape
    _, ci, kh, kw = w.shape
    # one GEMM for all kernel taps, then k*k overlapping slice-adds (col2im)
    dcols = np.tensordot(w, dy, axes=([0], [1]))  # (Ci, kh, kw, N, OH, OW)
    dxp = np.zeros((n, ci, h + 2 * pad, w_in + 2 * pad), dy.dtype)
    for a in range(kh):
        for b in range(kw):
            dxp[:, :, a : a + stride * oh : stride, b : b + stride * ow : stride] += (
                dcols[:, a, b].transpose(1, 0, 2, 3)
            )
    if pad:
        return np.ascontiguousarray(dxp[:, :, pad : pad + h, pad : pad + w_in])
    return dxp


def bilinear_resize(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Align-corners bilinear resize of an NCHW array."""
    n, c, h, w = x.shape
    ys = np.linspace(0.0, h - 1.0, out_h) if out_h > 1 else np.zeros(1)
    xs = np.linspace(0.0, w - 1.0, out_w) if out_w > 1 else np.zeros(1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).astype(x.dtype)
    fx = (xs - x0).astype(x.dtype)
    top = x[:, :, y0, :]
    bot = x[:, :, y1, :]
    tl, tr = top[:, :, :, x0], top[:, :, :, x1]
    bl, br = bot[:, :, :, x0], bot[:, :, :, x1]
    fy = fy[None, None, :, None]
    fx = fx[None, None, None, :]
    return (1 - fy) * ((1 - fx) * tl + fx * tr) + fy * ((1 - fx) * bl + fx * br)
