"""Latent space descriptions, sampling, and normalization."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateLatentError, SpecMismatchError

_NORM_EPS = 1e-12


class LatentKind(str, Enum):
    SPHERICAL_Z = "spherical_z"
    PER_LAYER_W = "per_layer_w"


@dataclass(frozen=True)
class LatentSpec:
    kind: LatentKind
    dim: int
    num_layers: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.kind == LatentKind.SPHERICAL_Z and self.num_layers != 1:
            raise ValueError("spherical latents have exactly one layer")

    @property
    def flat_dim(self) -> int:
        return self.dim * self.num_layers

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "dim": self.dim, "num_layers": self.num_layers}

    @staticmethod
    def from_json(d: dict) -> "LatentSpec":
        return LatentSpec(LatentKind(d["kind"]), int(d["dim"]), int(d["num_layers"]))


@dataclass
class LatentCode:
    spec: LatentSpec
    values: np.ndarray  # [batch, num_layers, dim]

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3 or self.values.shape[1:] != (self.spec.num_layers, self.spec.dim):
            raise SpecMismatchError(
                f"latent values shape {self.values.shape} does not match spec "
                f"[batch, {self.spec.num_layers}, {self.spec.dim}]"
            )
        if not np.all(np.isfinite(self.values)):
            raise DegenerateLatentError("latent values contain non-finite entries")

    @property
    def batch(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        return self.values.reshape(self.batch, -1)


def sample_latent_rng(spec: LatentSpec, count: int, rng: np.random.Generator) -> LatentCode:
    """Draw ``count`` latents from an existing generator stream."""
    if count < 1:
        raise ValueError("count must be >= 1")
    values = rng.standard_normal((count, spec.num_layers, spec.dim))
    if spec.kind == LatentKind.SPHERICAL_Z:
        norms = np.linalg.norm(values.reshape(count, -1), axis=1, keepdims=True)
        values = values / np.maximum(norms, _NORM_EPS)[:, :, None]
    return LatentCode(spec, values.astype(np.float32))


def sample_latent(spec: LatentSpec, count: int, seed: int) -> LatentCode:
    """Seeded latent draw. Spherical samples are projected to unit L2 norm."""
    return sample_latent_rng(spec, count, np.random.default_rng(seed))


def normalize_latent(z: LatentCode) -> LatentCode:
    """Rescale each spherical sample to unit L2 norm."""
    if z.spec.kind != LatentKind.SPHERICAL_Z:
        raise SpecMismatchError("normalize_latent applies to spherical latents only")
    flat = z.flat()
    norms = np.linalg.norm(flat, axis=1)
    if np.any(norms < _NORM_EPS):
        raise DegenerateLatentError("cannot normalize a zero latent vector")
    values = (flat / norms[:, None]).reshape(z.values.shape)
    return LatentCode(z.spec, values.astype(z.values.dtype))
