"""Numba kernels: JIT-compiled parallel loops, same contracts as the
numpy backend.

Strided convolutions are decomposed into stride*stride input phases so
that every inner loop walks contiguous memory. Every output element is
written by exactly one thread and reassociation is fixed at compile
time, so results are deterministic regardless of thread count (they may
differ from the numpy backend at float rounding level).
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True)
def _pad2d(x, pad):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    out[:, :, pad : pad + h, pad : pad + w] = x
    return out


@njit(parallel=True, cache=True)
def _to_phases(xp, s):
    """Split (N,C,H,W) into an (s,s,N,C,ceil(H/s),ceil(W/s)) phase array."""
    n, c, hp, wp = xp.shape
    ph = (hp + s - 1) // s
    pw = (wp + s - 1) // s
    out = np.zeros((s, s, n, c, ph, pw), dtype=xp.dtype)
    for b in prange(n):
        for ch in range(c):
            for y in range(hp):
                pa = y % s
                yy = y // s
                row_in = xp[b, ch, y]
                for pb in range(s):
                    row_out = out[pa, pb, b, ch, yy]
                    for xx in range(pb, wp, s):
                        row_out[xx // s] = row_in[xx]
    return out


@njit(parallel=True, cache=True, fastmath=True)
def _conv2d_fwd_phased(xph, w, s, oh, ow):
    n = xph.shape[2]
    ci = xph.shape[3]
    co, _, kh, kw = w.shape
    y = np.zeros((n, co, oh, ow), dtype=xph.dtype)
    for idx in prange(n * co):
        b = idx // co
        o = idx % co
        out = y[b, o]
        for c in range(ci):
            for a in range(kh):
                pa = a % s
                oa = a // s
                for k in range(kw):
                    pk = k % s
                    ok = k // s
                    wv = w[o, c, a, k]
                    for oy in range(oh):
                        row = xph[pa, pk, b, c, oy + oa]
                        orow = out[oy]
                        for ox in range(ow):
                            orow[ox] += wv * row[ox + ok]
    return y


@njit(parallel=True, cache=True, fastmath=True)
def _conv2d_bwd_input_phased(dy, w, s, ph, pw):
    n, co, oh, ow = dy.shape
    _, ci, kh, kw = w.shape
    dxph = np.zeros((s, s, n, ci, ph, pw), dtype=dy.dtype)
    for idx in prange(n * ci):
        b = idx // ci
        c = idx % ci
        for o in range(co):
            for a in range(kh):
                pa = a % s
                oa = a // s
                for k in range(kw):
                    pk = k % s
                    ok = k // s
                    wv = w[o, c, a, k]
                    for oy in range(oh):
                        grow = dy[b, o, oy]
                        arow = dxph[pa, pk, b, c, oy + oa]
                        for ox in range(ow):
                            arow[ox + ok] += wv * grow[ox]
    return dxph


@njit(parallel=True, cache=True)
def _from_phases(dxph, s, n, ci, hp, wp, pad, h, w_in):
    dx = np.empty((n, ci, h, w_in), dtype=dxph.dtype)
    for b in prange(n):
        for c in range(ci):
            for y in range(h):
                yy = y + pad
                src_rows = dxph[yy % s, :, b, c, yy // s]
                row = dx[b, c, y]
                for x in range(w_in):
                    xx = x + pad
                    row[x] = src_rows[xx % s][xx // s]
    return dx


@njit(parallel=True, cache=True, fastmath=True)
def _conv2d_bwd_weight_phased(xph, dy, s, kh, kw):
    n, co, oh, ow = dy.shape
    ci = xph.shape[3]
    dw = np.zeros((co, ci, kh, kw), dtype=xph.dtype)
    for o in prange(co):
        for c in range(ci):
            for a in range(kh):
                pa = a % s
                oa = a // s
                for k in range(kw):
                    pk = k % s
                    ok = k // s
                    acc = 0.0
                    for b in range(n):
                        for oy in range(oh):
                            acc += np.dot(
                                xph[pa, pk, b, c, oy + oa, ok : ok + ow], dy[b, o, oy]
                            )
                    dw[o, c, a, k] = acc
    return dw


@njit(parallel=True, cache=True, fastmath=True)
def _bilinear_resize(x, out_h, out_w):
    n, c, h, w = x.shape
    out = np.empty((n, c, out_h, out_w), dtype=x.dtype)
    sy = (h - 1.0) / (out_h - 1.0) if out_h > 1 else 0.0
    sx = (w - 1.0) / (out_w - 1.0) if out_w > 1 else 0.0
    for b in prange(n):
        for ch in range(c):
            for oy in range(out_h):
                fy = oy * sy
                y0 = int(fy)
                y1 = min(y0 + 1, h - 1)
                wy = fy - y0
                for ox in range(out_w):
                    fx = ox * sx
                    x0 = int(fx)
                    x1 = min(x0 + 1, w - 1)
                    wx = fx - x0
                    top = (1.0 - wx) * x[b, ch, y0, x0] + wx * x[b, ch, y0, x1]
                    bot = (1.0 - wx) * x[b, ch, y1, x0] + wx * x[b, ch, y1, x1]
                    out[b, ch, oy, ox] = (1.0 - wy) * top + wy * bot
    return out


def conv2d_fwd(x, w, stride, pad):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    xp = _pad2d(x, pad) if pad else x
    kh, kw = w.shape[2], w.shape[3]
    oh = (x.shape[2] + 2 * pad - kh) // stride + 1
    ow = (x.shape[3] + 2 * pad - kw) // stride + 1
    xph = _to_phases(xp, stride) if stride > 1 else xp[None, None]
    return _conv2d_fwd_phased(xph, w, stride, oh, ow)


def conv2d_bwd_input(dy, w, stride, pad, h, w_in):
    dy = np.ascontiguousarray(dy)
    w = np.ascontiguousarray(w)
    n, ci = dy.shape[0], w.shape[1]
    hp, wp = h + 2 * pad, w_in + 2 * pad
    ph = (hp + stride - 1) // stride
    pw = (wp + stride - 1) // stride
    dxph = _conv2d_bwd_input_phased(dy, w, stride, ph, pw)
    return _from_phases(dxph, stride, n, ci, hp, wp, pad, h, w_in)


def conv2d_bwd_weight(x, dy, stride, pad, kh, kw):
    x = np.ascontiguousarray(x)
    dy = np.ascontiguousarray(dy)
    xp = _pad2d(x, pad) if pad else x
    xph = _to_phases(xp, stride) if stride > 1 else xp[None, None]
    return _conv2d_bwd_weight_phased(xph, dy, stride, kh, kw)


def bilinear_resize(x, out_h, out_w):
    return _bilinear_resize(np.ascontiguousarray(x), out_h, out_w)
