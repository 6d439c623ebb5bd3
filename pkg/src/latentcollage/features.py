"""Fixed random convolutional features.

Both the perceptual distance used in training losses and the feature
extractor used by the evaluation metrics run images through small conv
stacks whose weights are drawn once from pinned seeds. They are
deterministic, differentiable, and need no pretrained weights; a
pretrained network can be swapped in through the extractor registry
without touching any metric code.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import backend, nn
from .autodiff import Tensor
from .errors import ShapeMismatchError
from .images import ImageBatch

_PERCEPTUAL_SEED = 1337
_EXTRACTOR_SEED = 733
_NORM_EPS = 1e-8
_RAW_WEIGHT = 0.01  # tiny pixel-space term keeps the distance zero only at equality

BUILTIN_EXTRACTOR_ID = "randconv64/v1"
BUILTIN_FEAT_DIM = 64
_EXTRACTOR_INPUT = 32


class _ScaleStack(nn.Module):
    """One fixed conv + nonlinearity per pyramid scale.

    The pyramid starts at half resolution: the raw-pixel term already
    covers the finest scale, and the convs are 4x cheaper there.
    """

    def __init__(self, channels: int = 24, scales: int = 3):
        rng = np.random.default_rng(_PERCEPTUAL_SEED)
        self.convs = [nn.Conv2d(3, channels, 3, stride=1, pad=1, rng=rng) for _ in range(scales)]
        self.set_trainable(False)

    def features(self, x: Tensor) -> list[Tensor]:
        out = []
        h = ad.avg_pool2(x)
        for conv in self.convs:
            f = ad.leaky_relu(conv(h))
            norm = ad.sqrt(ad.sum_(f * f, axis=1, keepdims=True) + _NORM_EPS)
            out.append(f / norm)
            h = ad.avg_pool2(h)
        return out


_perceptual: _ScaleStack | None = None


def _get_perceptual() -> _ScaleStack:
    global _perceptual
    if _perceptual is None:
        _perceptual = _ScaleStack()
    return _perceptual


def perceptual_distance_t(x: Tensor, y: Tensor) -> Tensor:
    """Differentiable per-sample perceptual distance between image tensors."""
    if x.shape != y.shape:
        raise ShapeMismatchError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.shape[2] % 8 or x.shape[3] % 8:
        raise ShapeMismatchError("perceptual distance needs spatial sizes divisible by 8")
    stack = _get_perceptual()
    if x.dtype != np.float32:
        stack = _f64_perceptual()
    fx = stack.features(x)
    fy = stack.features(y)
    total = None
    for a, b in zip(fx, fy):
        d = a - b
        term = ad.mean(d * d, axis=(1, 2, 3))
        total = term if total is None else total + term
    raw = x - y
    total = total + ad.mean(raw * raw, axis=(1, 2, 3)) * _RAW_WEIGHT
    return total


_perceptual64: _ScaleStack | None = None


def _f64_perceptual() -> _ScaleStack:
    global _perceptual64
    if _perceptual64 is None:
        _perceptual64 = _ScaleStack().astype(np.float64)
        _perceptual64.set_trainable(False)
    return _perceptual64


def perceptual_distance(x: ImageBatch, y: ImageBatch) -> np.ndarray:
    """Per-sample perceptual distance; non-negative, symmetric, 0 iff equal."""
    if x.values.shape != y.values.shape:
        raise ShapeMismatchError(f"shape mismatch: {x.values.shape} vs {y.values.shape}")
    with ad.no_grad():
        d = perceptual_distance_t(Tensor(x.values), Tensor(y.values))
    return d.data.copy()


class _ExtractorStack(nn.Module):
    def __init__(self):
        rng = np.random.default_rng(_EXTRACTOR_SEED)
        self.convs = [
            nn.Conv2d(3, 32, 3, stride=2, pad=1, rng=rng),
            nn.Conv2d(32, 64, 3, stride=2, pad=1, rng=rng),
            nn.Conv2d(64, BUILTIN_FEAT_DIM, 3, stride=2, pad=1, rng=rng),
        ]
        self.set_trainable(False)

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for conv in self.convs:
            h = ad.leaky_relu(conv(h))
        return ad.mean(h, axis=(2, 3))


_extractor: _ExtractorStack | None = None


def builtin_extractor(values: np.ndarray, chunk: int = 64) -> np.ndarray:
    """Embed an (N, 3, H, W) batch into (N, 64) features deterministically.

    Inputs are first resized to a fixed working resolution so feature
    statistics are comparable across image sizes.
    """
    global _extractor
    if _extractor is None:
        _extractor = _ExtractorStack()
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 4 or values.shape[1] != 3:
        raise ShapeMismatchError(f"expected (n, 3, h, w), got {values.shape}")
    K = backend.kernels()
    out = np.empty((values.shape[0], BUILTIN_FEAT_DIM), dtype=np.float32)
    with ad.no_grad():
        for start in range(0, values.shape[0], chunk):
            part = values[start : start + chunk]
            if part.shape[2:] != (_EXTRACTOR_INPUT, _EXTRACTOR_INPUT):
                part = K.bilinear_resize(part, _EXTRACTOR_INPUT, _EXTRACTOR_INPUT)
            out[start : start + chunk] = _extractor(Tensor(part)).data
    return out
