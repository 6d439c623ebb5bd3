"""Evaluation metrics: masked L1, Fréchet feature distance and its delta
protocol, and k-NN density/coverage.

All metrics are pure functions of immutable inputs. Feature sets carry the
id of the extractor that produced them; mixing extractors is an error.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EmptyMaskError,
    ExtractorMismatchError,
    InsufficientSamplesError,
    NumericalFailureError,
    ShapeMismatchError,
    UnknownExtractorError,
)
from .features import BUILTIN_EXTRACTOR_ID, builtin_extractor
from .images import ImageBatch
from .masking import Mask


@dataclass
class FeatureSet:
    values: np.ndarray  # [n_samples, feat_dim]
    extractor_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ShapeMismatchError(f"features must be (n, d), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class MetricsReport:
    masked_l1: float | None
    fid: float
    fid_delta: float | None
    density: float
    coverage: float
    n_samples: int
    k_neighbors: int
    extractor_id: str = BUILTIN_EXTRACTOR_ID
    collage_fid_delta: float | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in vars(self).items()}

    @staticmethod
    def from_json(d: dict) -> "MetricsReport":
        return MetricsReport(**d)


def masked_l1(x: ImageBatch, y: ImageBatch, m: Mask) -> float:
    """Mean absolute error over known pixels only (mask area x channels)."""
    if x.values.shape != y.values.shape:
        raise ShapeMismatchError(f"image shapes differ: {x.values.shape} vs {y.values.shape}")
    if x.values.shape[0] != m.values.shape[0] or x.values.shape[2:] != m.values.shape[2:]:
        raise ShapeMismatchError("mask does not match the image batch")
    area = float(m.values.sum())
    if area == 0.0:
        raise EmptyMaskError("masked_l1 over an all-zero mask is undefined")
    total = float(np.abs((x.values - y.values) * m.values).sum())
    return total / (area * x.values.shape[1])


def _sqrt_trace_of_product(cov_a: np.ndarray, cov_b: np.ndarray) -> float:
    """tr((Sa Sb)^(1/2)) via eigendecomposition of sqrt(Sa) Sb sqrt(Sa)."""
    try:
        wa, va = np.linalg.eigh(cov_a)
        wa = np.clip(wa, 0.0, None)
        root_a = (va * np.sqrt(wa)) @ va.T
        m = root_a @ cov_b @ root_a
        wm = np.linalg.eigvalsh((m + m.T) * 0.5)
    except np.linalg.LinAlgError as e:
        raise NumericalFailureError(f"covariance square root failed: {e}") from e
    return float(np.sqrt(np.clip(wm, 0.0, None)).sum())


def frechet_distance(a: FeatureSet, b: FeatureSet) -> float:
    """Fréchet distance between Gaussian fits of two feature sets."""
    if a.dim != b.dim:
        raise ShapeMismatchError(f"feature dims differ: {a.dim} vs {b.dim}")
    if a.n < 2 or b.n < 2:
        raise InsufficientSamplesError("need at least 2 samples per set for covariances")
    xa = a.values.astype(np.float64)
    xb = b.values.astype(np.float64)
    mu_a, mu_b = xa.mean(axis=0), xb.mean(axis=0)
    cov_a = np.cov(xa, rowvar=False)
    cov_b = np.cov(xb, rowvar=False)
    d2 = float(((mu_a - mu_b) ** 2).sum())
    value = d2 + float(np.trace(cov_a) + np.trace(cov_b)) - 2.0 * _sqrt_trace_of_product(cov_a, cov_b)
    if value < 0.0:
        if value < -1e-4:
            warnings.warn(f"clamping negative Fréchet distance {value:.3e} to 0")
        value = 0.0
    return value


def density_coverage(real: FeatureSet, fake: FeatureSet, k: int = 5) -> tuple[float, float]:
    """k-NN manifold metrics (closed balls around each real sample).

    density: generated samples per real k-NN ball, normalized by k.
    coverage: fraction of real balls containing at least one generated sample.
    """
    if real.extractor_id != fake.extractor_id:
        raise ExtractorMismatchError(
            f"feature sets from different extractors: {real.extractor_id} vs {fake.extractor_id}"
        )
    if real.n <= k or fake.n <= k:
        raise InsufficientSamplesError(f"need more than k={k} samples in each set")
    r = real.values.astype(np.float64)
    f = fake.values.astype(np.float64)
    d_rr = _pairwise(r, r)
    np.fill_diagonal(d_rr, np.inf)
    radii = np.partition(d_rr, k - 1, axis=1)[:, k - 1]  # k-th nearest real neighbor
    d_fr = _pairwise(f, r)
    in_ball = d_fr <= radii[None, :]
    density = float(in_ball.sum()) / (k * fake.n)
    coverage = float(in_ball.any(axis=0).mean())
    return density, coverage


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    sq = aa + bb - 2.0 * (a @ b.T)
    return np.sqrt(np.clip(sq, 0.0, None))


def fid_delta(composites: FeatureSet, reencoded: FeatureSet, reference: FeatureSet) -> float:
    """FID(composites, reference) - FID(reencoded, reference).

    Isolates composition-induced quality loss from the encoder's native
    reconstruction error.
    """
    ids = {composites.extractor_id, reencoded.extractor_id, reference.extractor_id}
    if len(ids) != 1:
        raise ExtractorMismatchError(f"feature sets from different extractors: {sorted(ids)}")
    return frechet_distance(composites, reference) - frechet_distance(reencoded, reference)


# ---------------------------------------------------------------------------
# Extractor registry and feature persistence
# ---------------------------------------------------------------------------

_EXTRACTORS = {BUILTIN_EXTRACTOR_ID: builtin_extractor}


def register_extractor(extractor_id: str, fn) -> None:
    _EXTRACTORS[extractor_id] = fn


def extract_features(x: ImageBatch, extractor_id: str = BUILTIN_EXTRACTOR_ID) -> FeatureSet:
    fn = _EXTRACTORS.get(extractor_id)
    if fn is None:
        raise UnknownExtractorError(
            f"unknown extractor {extractor_id!r}; registered: {sorted(_EXTRACTORS)}"
        )
    return FeatureSet(fn(x.values), extractor_id)


def save_feature_set(path, fs: FeatureSet) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(fs.values, dtype="<f4")
    (path / "features.bin").write_bytes(arr.tobytes())
    with open(path / "meta.json", "w") as f:
        json.dump(
            {"n": int(arr.shape[0]), "dim": int(arr.shape[1]), "extractor_id": fs.extractor_id},
            f,
            indent=2,
        )


def load_feature_set(path) -> FeatureSet:
    path = Path(path)
    with open(path / "meta.json") as f:
        meta = json.load(f)
    raw = (path / "features.bin").read_bytes()
    values = np.frombuffer(raw, dtype="<f4").reshape(meta["n"], meta["dim"]).copy()
    return FeatureSet(values, meta["extractor_id"])
