"""The latent regressor (encoder) and the reconstruction loss assembly.

The encoder maps a masked image (plus, normally, the mask as a fourth
input channel) to a latent code for a frozen generator. The training
objective combines image MSE, a perceptual term, and a latent-recovery
term dispatched on the latent kind: cosine for spherical latents, MSE
for per-layer codes. Reconstruction terms always compare against the
full target image; the mask enters only through the encoder input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DegenerateLatentError, SpecMismatchError
from .features import perceptual_distance_t
from .images import ImageBatch
from .latent import LatentCode, LatentKind, LatentSpec
from .masking import Mask

_EPS = 1e-12


def default_loss_weights() -> dict:
    return {"image_mse": 1.0, "perceptual": 1.0, "latent": 1.0}


@dataclass
class EncoderConfig:
    latent_spec: LatentSpec
    image_size: int = 64
    input_channels: int = 4  # RGB + mask; 3 for the mask-unaware variant
    backbone_depth: int = 4
    base_channels: int = 16
    loss_weights: dict = field(default_factory=default_loss_weights)

    def __post_init__(self):
        if self.input_channels not in (3, 4):
            raise ValueError("input_channels must be 3 or 4")
        if self.backbone_depth < 1:
            raise ValueError("backbone_depth must be >= 1")
        if self.image_size % (2**self.backbone_depth) != 0:
            raise ValueError("image_size must be divisible by 2**backbone_depth")
        weights = {**default_loss_weights(), **self.loss_weights}
        if any(w < 0 for w in weights.values()):
            raise ValueError("loss weights must be non-negative")
        if not any(w > 0 for w in weights.values()):
            raise ValueError("at least one loss weight must be positive")
        self.loss_weights = weights

    def to_json(self) -> dict:
        return {
            "latent_spec": self.latent_spec.to_json(),
            "image_size": self.image_size,
            "input_channels": self.input_channels,
            "backbone_depth": self.backbone_depth,
            "base_channels": self.base_channels,
            "loss_weights": dict(self.loss_weights),
        }

    @staticmethod
    def from_json(d: dict) -> "EncoderConfig":
        return EncoderConfig(
            latent_spec=LatentSpec.from_json(d["latent_spec"]),
            image_size=int(d["image_size"]),
            input_channels=int(d["input_channels"]),
            backbone_depth=int(d["backbone_depth"]),
            base_channels=int(d["base_channels"]),
            loss_weights=dict(d["loss_weights"]),
        )


class EncoderModule(nn.Module):
    def __init__(self, config: EncoderConfig, *, rng):
        b = config.base_channels
        cap = b * 8
        self.stem = nn.Conv2d(config.input_channels, b, 3, stride=1, pad=1, rng=rng)
        chans = [b]
        self.stages = []
        for _ in range(config.backbone_depth):
            nxt = min(chans[-1] * 2, cap)
            self.stages.append(nn.Conv2d(chans[-1], nxt, 4, stride=2, pad=1, rng=rng))
            chans.append(nxt)
        spatial = config.image_size // (2**config.backbone_depth)
        flat = chans[-1] * spatial * spatial
        self.neck = nn.Dense(flat, 256, rng=rng)
        self.head = nn.Dense(256, config.latent_spec.flat_dim, gain=1.0, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = ad.leaky_relu(self.stem(x))
        for stage in self.stages:
            h = ad.leaky_relu(stage(h))
        h = ad.reshape(h, (h.shape[0], -1))
        h = ad.leaky_relu(self.neck(h))
        return self.head(h)


@dataclass
class EncoderHandle:
    config: EncoderConfig
    module: EncoderModule
    step_count: int = 0

    def forward_tensor(self, x: Tensor) -> Tensor:
        return self.module(x)

    def save(self, path) -> None:
        meta = {"config": self.config.to_json(), "step_count": self.step_count}
        save_checkpoint(path, self.module.export_arrays(), meta)

    def clone(self) -> "EncoderHandle":
        copy = build_encoder(self.config, seed=0)
        copy.module.load_arrays(self.module.export_arrays())
        copy.step_count = self.step_count
        return copy


def build_encoder(config: EncoderConfig, seed: int = 0) -> EncoderHandle:
    rng = np.random.default_rng(seed)
    module = EncoderModule(config, rng=rng)
    module.set_trainable(True)
    return EncoderHandle(config=config, module=module)


def load_encoder(path) -> EncoderHandle:
    meta, arrays = load_checkpoint(path)
    config = EncoderConfig.from_json(meta["config"])
    handle = build_encoder(config, seed=0)
    handle.module.load_arrays(arrays)
    handle.step_count = int(meta.get("step_count", 0))
    return handle


def encoder_input_tensor(config: EncoderConfig, x_m: np.ndarray, m: np.ndarray | None) -> Tensor:
    if config.input_channels == 4:
        return Tensor(np.concatenate([x_m, m], axis=1))
    return Tensor(x_m)


def encode(E: EncoderHandle, x_m: ImageBatch, m: Mask | None = None) -> LatentCode:
    """Predict the latent code of a (masked) image batch.

    ``x_m`` must already carry zeros where the mask is 0; the mask is
    required exactly when the encoder was built with a mask channel.
    """
    if E.config.input_channels == 4 and m is None:
        raise SpecMismatchError("this encoder takes a mask channel; pass one")
    if E.config.input_channels == 3 and m is not None:
        raise SpecMismatchError("this encoder has no mask channel")
    if m is not None and x_m.values.shape[2:] != m.values.shape[2:]:
        raise SpecMismatchError("image and mask spatial sizes differ")
    with ad.no_grad():
        out = E.forward_tensor(
            encoder_input_tensor(E.config, x_m.values, None if m is None else m.values)
        )
    spec = E.config.latent_spec
    return LatentCode(spec, out.data.reshape(-1, spec.num_layers, spec.dim).copy())


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def image_mse_t(a: Tensor, b: Tensor) -> Tensor:
    d = a - b
    return ad.mean(d * d, axis=(1, 2, 3))


def latent_loss_cosine_t(z: Tensor, z_hat: Tensor) -> Tensor:
    dot = ad.sum_(z * z_hat, axis=1)
    na = ad.sqrt(ad.sum_(z * z, axis=1) + _EPS)
    nb = ad.sqrt(ad.sum_(z_hat * z_hat, axis=1) + _EPS)
    return 1.0 - dot / (na * nb)


def latent_loss_mse_t(w: Tensor, w_hat: Tensor) -> Tensor:
    d = w - w_hat
    return ad.mean(d * d, axis=1)


def latent_loss_cosine(z: LatentCode, z_hat: LatentCode) -> np.ndarray:
    """Per-sample cosine recovery loss in [0, 2]; 0 iff codes are parallel."""
    if z.spec.kind != LatentKind.SPHERICAL_Z or z_hat.spec.kind != LatentKind.SPHERICAL_Z:
        raise SpecMismatchError("cosine latent loss applies to spherical latents")
    a, b = z.flat(), z_hat.flat()
    if np.any(np.linalg.norm(a, axis=1) < 1e-9) or np.any(np.linalg.norm(b, axis=1) < 1e-9):
        raise DegenerateLatentError("cosine loss of a zero latent is undefined")
    with ad.no_grad():
        out = latent_loss_cosine_t(Tensor(a.astype(np.float64)), Tensor(b.astype(np.float64)))
    return out.data.copy()


def latent_loss_mse(w: LatentCode, w_hat: LatentCode) -> np.ndarray:
    """Per-sample mean squared error over all layer x dim entries."""
    if w.spec != w_hat.spec:
        raise SpecMismatchError(f"latent specs differ: {w.spec} vs {w_hat.spec}")
    if w.spec.kind != LatentKind.PER_LAYER_W:
        raise SpecMismatchError("mse latent loss applies to per-layer latents")
    with ad.no_grad():
        out = latent_loss_mse_t(Tensor(w.flat()), Tensor(w_hat.flat()))
    return out.data.copy()


def total_loss_t(
    E_module,
    G,
    x: Tensor,
    z_flat: Tensor,
    m: Tensor,
    weights: dict,
    input_channels: int,
    latent_kind: LatentKind,
) -> tuple[Tensor, dict]:
    """Differentiable loss graph; returns (scalar tensor, weighted breakdown)."""
    x_m = x * m
    enc_in = ad.concat([x_m, m], axis=1) if input_channels == 4 else x_m
    z_hat = E_module(enc_in)
    x_hat = G.forward_tensor(z_hat)

    w1 = weights.get("image_mse", 0.0)
    w2 = weights.get("perceptual", 0.0)
    w3 = weights.get("latent", 0.0)
    total = None
    breakdown = {"mse": 0.0, "perceptual": 0.0, "latent": 0.0}

    def add_term(total, term, w, name):
        term = ad.mean(term) * w
        breakdown[name] = float(term.data)
        return term if total is None else total + term

    if w1 > 0:
        total = add_term(total, image_mse_t(x_hat, x), w1, "mse")
    if w2 > 0:
        total = add_term(total, perceptual_distance_t(x_hat, x), w2, "perceptual")
    if w3 > 0:
        if latent_kind == LatentKind.SPHERICAL_Z:
            lat = latent_loss_cosine_t(z_flat, z_hat)
        else:
            lat = latent_loss_mse_t(z_flat, z_hat)
        total = add_term(total, lat, w3, "latent")
    breakdown["total"] = float(total.data)
    return total, breakdown


def total_loss(
    E: EncoderHandle,
    G,
    x: ImageBatch,
    z: LatentCode,
    m: Mask | None = None,
    weights: dict | None = None,
) -> tuple[float, dict]:
    """Weighted training loss and its per-component breakdown (no gradients)."""
    if weights is None:
        weights = E.config.loss_weights
    h, w_sz = x.values.shape[2:]
    m_arr = np.ones((x.batch, 1, h, w_sz), dtype=np.float32) if m is None else m.values
    with ad.no_grad():
        t, breakdown = total_loss_t(
            E.module,
            G,
            Tensor(x.values),
            Tensor(z.flat()),
            Tensor(m_arr),
            weights,
            E.config.input_channels,
            E.config.latent_spec.kind,
        )
    return float(t.data), breakdown
