"""Binary masks: the upsampled-noise training sampler plus mask algebra.

A mask value of 1 marks a known pixel (reconstruct), 0 an unknown pixel
(inpaint). The training sampler draws a small uniform-noise patch,
bilinearly upsamples it to image resolution (align-corners), and keeps
pixels whose noise exceeds a per-sample threshold drawn from
``threshold_range``. Ties resolve to 0 (strict ``>``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import EmptyInputError, ShapeMismatchError
from .images import ImageBatch


@dataclass
class Mask:
    values: np.ndarray  # [batch, 1, height, width], entries in {0, 1}

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 4 or v.shape[1] != 1:
            raise ShapeMismatchError(f"expected [batch, 1, h, w], got shape {v.shape}")
        if not np.all((v == 0.0) | (v == 1.0)):
            raise ValueError("mask entries must be exactly 0 or 1")
        self.values = v

    @property
    def batch(self) -> int:
        return self.values.shape[0]

    @property
    def spatial(self) -> tuple:
        return self.values.shape[2], self.values.shape[3]

    def fraction_ones(self) -> float:
        return float(self.values.mean())

    def single_hw(self) -> np.ndarray:
        return self.values[0, 0]


def ones_mask(height: int, width: int, batch: int = 1) -> Mask:
    return Mask(np.ones((batch, 1, height, width), dtype=np.float32))


def zeros_mask(height: int, width: int, batch: int = 1) -> Mask:
    return Mask(np.zeros((batch, 1, height, width), dtype=np.float32))


def bilinear_upsample(patch: np.ndarray, height: int, width: int) -> np.ndarray:
    """Align-corners bilinear upsampling of a (batch, 1, p, p) noise patch."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim == 2:
        patch = patch[None, None]
    return backend.kernels().bilinear_resize(patch, height, width)


def mask_from_noise(patch: np.ndarray, threshold, height: int, width: int) -> Mask:
    """Threshold an upsampled noise patch into a binary mask.

    ``threshold`` is a scalar or one value per batch element. This is the
    deterministic core of ``sample_mask``, exposed so fixed noise patterns
    and degenerate thresholds can be fed directly.
    """
    up = bilinear_upsample(patch, height, width)
    t = np.asarray(threshold, dtype=np.float64).reshape(-1, 1, 1, 1)
    return Mask((up > t).astype(np.float32))


def sample_mask_rng(
    height: int,
    width: int,
    batch: int,
    rng: np.random.Generator,
    patch_size: int = 6,
    threshold_range: tuple = (0.3, 1.0),
) -> Mask:
    lo, hi = threshold_range
    if patch_size < 2:
        raise ValueError("patch_size must be >= 2")
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"threshold_range must satisfy 0 <= lo < hi <= 1, got {threshold_range}")
    patch = rng.uniform(size=(batch, 1, patch_size, patch_size))
    t = rng.uniform(lo, hi, size=batch)
    return mask_from_noise(patch, t, height, width)


def sample_mask(
    height: int,
    width: int,
    batch: int = 1,
    patch_size: int = 6,
    threshold_range: tuple = (0.3, 1.0),
    seed: int = 0,
) -> Mask:
    """Seeded draw of training masks (noise patch + per-element threshold)."""
    rng = np.random.default_rng(seed)
    return sample_mask_rng(height, width, batch, rng, patch_size, threshold_range)


def apply_mask(x: ImageBatch, m: Mask) -> ImageBatch:
    """Zero out unknown pixels: elementwise product broadcast over channels."""
    if x.values.shape[0] != m.values.shape[0] or x.values.shape[2:] != m.values.shape[2:]:
        raise ShapeMismatchError(
            f"image shape {x.values.shape} does not match mask shape {m.values.shape}"
        )
    return ImageBatch(x.values * m.values)


def union_masks(masks: list) -> Mask:
    """Elementwise logical OR over a non-empty list of same-shape masks."""
    if not masks:
        raise EmptyInputError("union_masks needs at least one mask")
    shape = masks[0].values.shape
    for m in masks[1:]:
        if m.values.shape != shape:
            raise ShapeMismatchError("all masks must share one shape")
    out = masks[0].values.copy()
    for m in masks[1:]:
        out = np.maximum(out, m.values)
    return Mask(out)
