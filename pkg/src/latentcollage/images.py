"""Image batches in [-1, 1] and the PNG boundary.

Everything inside the package works on channels-first float arrays in
[-1, 1]; conversion to 8-bit PNG happens only here. PNG quantization is
lossy by at most 1/255 per pixel (documented wire tolerance).
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ShapeMismatchError

_RANGE_TOL = 1e-5


@dataclass
class ImageBatch:
    values: np.ndarray  # [batch, channels, height, width], entries in [-1, 1]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 4:
            raise ShapeMismatchError(f"expected [batch, c, h, w], got shape {v.shape}")
        lo, hi = float(v.min(initial=0.0)), float(v.max(initial=0.0))
        if lo < -1.0 - _RANGE_TOL or hi > 1.0 + _RANGE_TOL:
            raise ValueError(f"image values outside [-1, 1]: min={lo}, max={hi}")
        self.values = np.clip(v, -1.0, 1.0)

    @property
    def batch(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def single(self) -> np.ndarray:
        if self.batch != 1:
            raise ShapeMismatchError(f"expected a single image, batch={self.batch}")
        return self.values[0]


def to_uint8(chw: np.ndarray) -> np.ndarray:
    """[-1, 1] float (C,H,W) -> (H,W,C) uint8."""
    arr = np.clip((np.asarray(chw) + 1.0) * 0.5 * 255.0 + 0.5, 0, 255).astype(np.uint8)
    return arr.transpose(1, 2, 0)


def from_uint8(hwc: np.ndarray) -> np.ndarray:
    """(H,W,C) uint8 -> [-1, 1] float32 (C,H,W)."""
    arr = np.asarray(hwc, dtype=np.float32) / 255.0 * 2.0 - 1.0
    return arr.transpose(2, 0, 1)


def png_bytes(chw: np.ndarray) -> bytes:
    img = Image.fromarray(to_uint8(chw), mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def from_png_bytes(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data)).convert("RGB")
    return from_uint8(np.asarray(img))


def save_png(path, chw: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(png_bytes(chw))


def load_png(path) -> np.ndarray:
    with open(path, "rb") as f:
        return from_png_bytes(f.read())


def b64_png(chw: np.ndarray) -> str:
    return base64.b64encode(png_bytes(chw)).decode("ascii")


def from_b64_png(data: str) -> np.ndarray:
    return from_png_bytes(base64.b64decode(data))


# -- masks: single channel, strictly 0/255 on disk ---------------------------


def mask_png_bytes(mask_hw: np.ndarray) -> bytes:
    arr = (np.asarray(mask_hw) > 0.5).astype(np.uint8) * 255
    img = Image.fromarray(arr, mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png_bytes(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data)).convert("L")
    return (np.asarray(img) >= 128).astype(np.float32)


def save_mask_png(path, mask_hw: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(mask_png_bytes(mask_hw))


def load_mask_png(path) -> np.ndarray:
    with open(path, "rb") as f:
        return mask_from_png_bytes(f.read())


def b64_mask_png(mask_hw: np.ndarray) -> str:
    return base64.b64encode(mask_png_bytes(mask_hw)).decode("ascii")


def from_b64_mask_png(data: str) -> np.ndarray:
    return mask_from_png_bytes(base64.b64decode(data))
