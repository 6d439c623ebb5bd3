"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps an ndarray and records the operation that produced it;
``backward()`` replays the graph in reverse topological order. The engine
is dtype-preserving (float32 for training, float64 for gradient probes)
and routes the convolution hot paths through the active kernel backend.
Only what the package needs is implemented; this is not a general tensor
library.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from . import backend

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    # -- basic introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- autograd ------------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient requires a scalar output")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.asarray(grad, dtype=self.data.dtype)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- operators -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other, like=self), self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other, like=self), self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    # -- method sugar ----------------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.astype(t.data.dtype, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _make(data: np.ndarray, parents: tuple, bwd) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = bwd
    return out


# -- elementwise binary ops ------------------------------------------------


def add(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), bwd)


def mul(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), bwd)


def sub(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    data = a.data - b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), bwd)


def div(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    data = a.data / b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(data, (a, b), bwd)


def power(a, exponent: float):
    a = as_tensor(a)
    data = a.data**exponent

    def bwd(g):
        if a.requires_grad:
            _accum(a, g * exponent * a.data ** (exponent - 1))

    return _make(data, (a,), bwd)


# -- elementwise unary ops ---------------------------------------------------


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)

    def bwd(g):
        _accum(a, g * data)

    return _make(data, (a,), bwd)


def log(a):
    a = as_tensor(a)
    data = np.log(a.data)

    def bwd(g):
        _accum(a, g / a.data)

    return _make(data, (a,), bwd)


def sqrt(a):
    a = as_tensor(a)
    data = np.sqrt(a.data)

    def bwd(g):
        _accum(a, g / (2.0 * data))

    return _make(data, (a,), bwd)


def tanh(a):
    a = as_tensor(a)
    data = np.tanh(a.data)

    def bwd(g):
        _accum(a, g * (1.0 - data * data))

    return _make(data, (a,), bwd)


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = as_tensor(a)
    data = _sigmoid_np(a.data)

    def bwd(g):
        _accum(a, g * data * (1.0 - data))

    return _make(data, (a,), bwd)


def softplus(a):
    a = as_tensor(a)
    data = np.logaddexp(np.asarray(0.0, dtype=a.data.dtype), a.data)

    def bwd(g):
        _accum(a, g * _sigmoid_np(a.data))

    return _make(data, (a,), bwd)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    data = np.where(mask, a.data, 0.0).astype(a.data.dtype)

    def bwd(g):
        _accum(a, np.where(mask, g, 0.0).astype(a.data.dtype))

    return _make(data, (a,), bwd)


def leaky_relu(a, slope: float = 0.2):
    a = as_tensor(a)
    mask = a.data > 0
    data = np.where(mask, a.data, slope * a.data).astype(a.data.dtype)

    def bwd(g):
        _accum(a, np.where(mask, g, slope * g).astype(a.data.dtype))

    return _make(data, (a,), bwd)


def clip(a, lo: float, hi: float):
    a = as_tensor(a)
    data = np.clip(a.data, lo, hi)
    passthrough = (a.data > lo) & (a.data < hi)

    def bwd(g):
        _accum(a, np.where(passthrough, g, 0.0).astype(a.data.dtype))

    return _make(data, (a,), bwd)


# -- reductions ----------------------------------------------------------------


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            grad = np.broadcast_to(g, a.data.shape)
        else:
            g_exp = g if keepdims else np.expand_dims(g, axis)
            grad = np.broadcast_to(g_exp, a.data.shape)
        _accum(a, grad.astype(a.data.dtype))

    return _make(data, (a,), bwd)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return mul(sum_(a, axis, keepdims), 1.0 / float(count))


# -- shaping --------------------------------------------------------------------


def reshape(a, shape):
    a = as_tensor(a)
    data = a.data.reshape(shape)
    orig = a.data.shape

    def bwd(g):
        _accum(a, g.reshape(orig))

    return _make(data, (a,), bwd)


def transpose(a, axes=None):
    a = as_tensor(a)
    data = a.data.transpose(axes)
    inv = None if axes is None else np.argsort(axes)

    def bwd(g):
        _accum(a, g.transpose(inv))

    return _make(data, (a,), bwd)


def take(a, idx):
    a = as_tensor(a)
    data = a.data[idx]

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] += g
        _accum(a, full)

    return _make(data, (a,), bwd)


def concat(tensors, axis: int = 0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def bwd(g):
        start = 0
        for t, size in zip(tensors, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + size)
            if t.requires_grad:
                _accum(t, g[tuple(sl)])
            start += size

    return _make(data, tuple(tensors), bwd)


# -- linear algebra / convolutions ------------------------------------------------


def matmul(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _make(data, (a, b), bwd)


def conv2d(x, w, b=None, stride: int = 1, pad: int = 0):
    """Cross-correlation, NCHW, weight (out, in, kh, kw)."""
    x = as_tensor(x)
    w = as_tensor(w)
    K = backend.kernels()
    data = K.conv2d_fwd(x.data, w.data, stride, pad)
    if b is not None:
        data = data + b.data.reshape(1, -1, 1, 1)
    h, w_in = x.data.shape[2], x.data.shape[3]
    kh, kw = w.data.shape[2], w.data.shape[3]

    def bwd(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            _accum(x, K.conv2d_bwd_input(g, w.data, stride, pad, h, w_in))
        if w.requires_grad:
            _accum(w, K.conv2d_bwd_weight(x.data, g, stride, pad, kh, kw))
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 2, 3)))

    parents = (x, w) if b is None else (x, w, b)
    return _make(data, parents, bwd)


def conv_transpose2d(x, w, b=None, stride: int = 1, pad: int = 0):
    """Transposed convolution, weight (in, out, kh, kw).

    Output spatial size is (H - 1) * stride + k - 2 * pad.
    """
    x = as_tensor(x)
    w = as_tensor(w)
    K = backend.kernels()
    kh, kw = w.data.shape[2], w.data.shape[3]
    out_h = (x.data.shape[2] - 1) * stride + kh - 2 * pad
    out_w = (x.data.shape[3] - 1) * stride + kw - 2 * pad
    data = K.conv2d_bwd_input(x.data, w.data, stride, pad, out_h, out_w)
    if b is not None:
        data = data + b.data.reshape(1, -1, 1, 1)

    def bwd(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            _accum(x, K.conv2d_fwd(g, w.data, stride, pad))
        if w.requires_grad:
            _accum(w, K.conv2d_bwd_weight(g, x.data, stride, pad, kh, kw))
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 2, 3)))

    parents = (x, w) if b is None else (x, w, b)
    return _make(data, parents, bwd)


def avg_pool2(x):
    """2x2 average pooling (even spatial sizes only)."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    r = reshape(x, (n, c, h // 2, 2, w // 2, 2))
    return mean(mean(r, axis=5), axis=3)
