"""Minimal layer/optimizer toolkit on top of the autodiff engine.

Modules hold parameters as ``Tensor``s; ``named_parameters`` walks the
attribute tree so checkpoints can address every array by a stable name.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Module:
    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
                    elif isinstance(item, Tensor):
                        out[f"{key}.{i}"] = item
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def export_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(arrays)
        extra = set(arrays) - set(params)
        if missing or extra:
            raise KeyError(f"parameter name mismatch: missing={sorted(missing)}, extra={sorted(extra)}")
        for k, p in params.items():
            arr = np.asarray(arrays[k], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()

    def set_trainable(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad = flag

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self


def _param(arr: np.ndarray) -> Tensor:
    return Tensor(np.asarray(arr, dtype=np.float32), requires_grad=True)


class Conv2d(Module):
    def __init__(self, cin, cout, k, stride=1, pad=0, bias=True, gain=np.sqrt(2.0), *, rng):
        std = gain / np.sqrt(cin * k * k)
        self.weight = _param(rng.normal(0.0, std, size=(cout, cin, k, k)))
        self.bias = _param(np.zeros(cout)) if bias else None
        self.stride = stride
        self.pad = pad

    def __call__(self, x):
        return ad.conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class ConvTranspose2d(Module):
    def __init__(self, cin, cout, k, stride=1, pad=0, bias=True, gain=np.sqrt(2.0), *, rng):
        std = gain / np.sqrt(cin * k * k)
        self.weight = _param(rng.normal(0.0, std, size=(cin, cout, k, k)))
        self.bias = _param(np.zeros(cout)) if bias else None
        self.stride = stride
        self.pad = pad

    def __call__(self, x):
        return ad.conv_transpose2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class Dense(Module):
    def __init__(self, fin, fout, bias=True, gain=np.sqrt(2.0), *, rng):
        std = gain / np.sqrt(fin)
        self.weight = _param(rng.normal(0.0, std, size=(fin, fout)))
        self.bias = _param(np.zeros(fout)) if bias else None

    def __call__(self, x):
        y = ad.matmul(x, self.weight)
        if self.bias is not None:
            y = y + self.bias
        return y


class PixelNorm(Module):
    """Scale each sample to unit mean-square along ``axis`` (ProGAN style)."""

    def __init__(self, axis: int = 1, eps: float = 1e-8):
        self.axis = axis
        self.eps = eps

    def __call__(self, x):
        ms = ad.mean(x * x, axis=self.axis, keepdims=True)
        return x / ad.sqrt(ms + self.eps)


class Adam:
    def __init__(self, params: list[Tensor], lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data = p.data - (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def export_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for i in range(len(self.params)):
            out[f"adam.m.{i:03d}"] = self.m[i].copy()
            out[f"adam.v.{i:03d}"] = self.v[i].copy()
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray], t: int) -> None:
        for i in range(len(self.params)):
            self.m[i] = np.asarray(arrays[f"adam.m.{i:03d}"], dtype=self.m[i].dtype).copy()
            self.v[i] = np.asarray(arrays[f"adam.v.{i:03d}"], dtype=self.v[i].dtype).copy()
        self.t = t
