"""Frozen image generators behind one interface.

Two desk-scale generators ship: a deterministic procedural scene renderer
whose latent coordinate blocks control disjoint scene parts (the test
oracle for compositionality claims), and a small trainable adversarial
generator. Both are differentiable with respect to their latent input;
parameters are frozen after construction.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import CheckpointError, SpecMismatchError, TrainingDivergedError
from .images import ImageBatch
from .latent import LatentCode, LatentKind, LatentSpec, sample_latent_rng


class GeneratorKind(str, Enum):
    TOY_ADVERSARIAL = "toy_adversarial"
    PROCEDURAL_ORACLE = "procedural_oracle"
    IMPORTED = "imported"


@dataclass
class GeneratorHandle:
    kind: GeneratorKind
    latent_spec: LatentSpec
    output_shape: tuple  # (channels, height, width)
    module: nn.Module
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.module.set_trainable(False)

    def forward_tensor(self, z_flat: Tensor) -> Tensor:
        """Differentiable map from flat latents (N, num_layers*dim) to images."""
        return self.module(z_flat)

    def checksum(self) -> str:
        crc = 0
        arrays = self.module.export_arrays()
        for name in sorted(arrays):
            crc = zlib.crc32(arrays[name].astype("<f4").tobytes(), crc)
        return f"{crc:08x}"

    def save(self, path) -> None:
        meta = {
            "kind": self.kind.value,
            "latent_spec": self.latent_spec.to_json(),
            "output_shape": list(self.output_shape),
            **self.meta,
        }
        save_checkpoint(path, self.module.export_arrays(), meta)


def generate(G: GeneratorHandle, z: LatentCode) -> ImageBatch:
    """Render a latent batch. Pure in (weights, z); output lives in [-1, 1]."""
    if z.spec != G.latent_spec:
        raise SpecMismatchError(f"latent spec {z.spec} does not match generator {G.latent_spec}")
    with ad.no_grad():
        out = G.forward_tensor(Tensor(z.flat().astype(np.float32)))
    return ImageBatch(out.data)


# ---------------------------------------------------------------------------
# Procedural oracle
# ---------------------------------------------------------------------------

def _smootherstep(t: Tensor) -> Tensor:
    """C2 ramp: 0 for t<=0, 1 for t>=1, 6t^5-15t^4+10t^3 between."""
    tc = ad.clip(t, 0.0, 1.0)
    return tc * tc * tc * (tc * (tc * 6.0 - 15.0) + 10.0)


class ProceduralSceneModule(nn.Module):
    """Layered scene render: background gradient, building slab, tree blob.

    The latent splits into three contiguous coordinate blocks, one per part
    (``block_of`` maps part name to its index range). Each block is
    pixel-normalized on its own, so the render is invariant to positive
    rescaling of z, and each part's pixels depend only on its own block.
    Geometry is confined to fixed per-part regions (``PART_BOXES``); the
    alpha profiles have compact support, so perturbing one block never
    touches pixels outside that part's box.
    """

    EDGE = 0.04
    # (y0, y1, x0, x1) in unit canvas coordinates; maximal support per part
    PART_BOXES = {
        "building": (0.25, 1.0, 0.03, 0.47),
        "tree": (0.28, 0.72, 0.55, 0.95),
    }

    def __init__(self, dim: int, height: int, width: int, seed: int):
        if dim < 6:
            raise ValueError("procedural oracle needs a latent dim of at least 6")
        self.dim = dim
        self.height = height
        self.width = width
        d1, d2 = dim // 3, (2 * dim) // 3
        self.block_of = {"background": (0, d1), "building": (d1, d2), "tree": (d2, dim)}
        rng = np.random.default_rng(seed)

        def head(n_in, n_out):
            w = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out))
            b = rng.normal(0.0, 0.5, size=n_out)
            return Tensor(w.astype(np.float32)), Tensor(b.astype(np.float32))

        self.bg_w, self.bg_b = head(d1, 6)
        self.bld_w, self.bld_b = head(d2 - d1, 6)
        self.tree_w, self.tree_b = head(dim - d2, 6)
        ys = (np.arange(height) + 0.5) / height
        xs = (np.arange(width) + 0.5) / width
        self._gy = ys.reshape(1, 1, height, 1)
        self._gx = xs.reshape(1, 1, 1, width)

    def _block(self, z: Tensor, name: str) -> Tensor:
        i0, i1 = self.block_of[name]
        zb = z[:, i0:i1]
        ms = ad.mean(zb * zb, axis=1, keepdims=True)
        # tiny eps keeps z = 0 defined while making scale invariance hold
        # down to small positive rescalings
        return zb / ad.sqrt(ms + 1e-12)

    def part_params(self, z_flat: np.ndarray) -> dict:
        """Scene parameters for each sample (numpy, inference only)."""
        with ad.no_grad():
            out = {}
            z = Tensor(z_flat)
            nb = self._block(z, "building")
            u = ad.tanh(ad.matmul(nb, self.bld_w) + self.bld_b).data
            out["building"] = {
                "cx": 0.25 + 0.10 * u[:, 0],
                "half_w": 0.08 + 0.04 * u[:, 1],
                "top_y": 0.40 + 0.15 * u[:, 2],
            }
            nt = self._block(z, "tree")
            v = ad.tanh(ad.matmul(nt, self.tree_w) + self.tree_b).data
            out["tree"] = {
                "cx": 0.75 + 0.08 * v[:, 0],
                "cy": 0.50 + 0.10 * v[:, 1],
                "radius": 0.09 + 0.03 * v[:, 2],
            }
        return out

    def __call__(self, z: Tensor) -> Tensor:
        n = z.shape[0]
        gy = Tensor(self._gy.astype(z.dtype))
        gx = Tensor(self._gx.astype(z.dtype))

        # background: vertical gradient between two block-controlled colors
        nb = self._block(z, "background")
        c = ad.tanh(ad.matmul(nb, self.bg_w) + self.bg_b) * 0.8
        top = ad.reshape(c[:, 0:3], (n, 3, 1, 1))
        bottom = ad.reshape(c[:, 3:6], (n, 3, 1, 1))
        img = top + (bottom - top) * gy

        # building: grounded slab with smooth vertical and side edges
        nbd = self._block(z, "building")
        u = ad.tanh(ad.matmul(nbd, self.bld_w) + self.bld_b)
        cx = ad.reshape(u[:, 0] * 0.10 + 0.25, (n, 1, 1, 1))
        hw = ad.reshape(u[:, 1] * 0.04 + 0.08, (n, 1, 1, 1))
        ty = ad.reshape(u[:, 2] * 0.15 + 0.40, (n, 1, 1, 1))
        col = ad.reshape(u[:, 3:6] * 0.8, (n, 3, 1, 1))
        alpha = (
            _smootherstep((gx - (cx - hw)) * (1.0 / self.EDGE))
            * _smootherstep(((cx + hw) - gx) * (1.0 / self.EDGE))
            * _smootherstep((gy - ty) * (1.0 / self.EDGE))
        )
        img = img * (1.0 - alpha) + col * alpha

        # tree: compact-support radial blob
        ntr = self._block(z, "tree")
        v = ad.tanh(ad.matmul(ntr, self.tree_w) + self.tree_b)
        tx = ad.reshape(v[:, 0] * 0.08 + 0.75, (n, 1, 1, 1))
        tcy = ad.reshape(v[:, 1] * 0.10 + 0.50, (n, 1, 1, 1))
        rad = ad.reshape(v[:, 2] * 0.03 + 0.09, (n, 1, 1, 1))
        tcol = ad.reshape(v[:, 3:6] * 0.8, (n, 3, 1, 1))
        dx = gx - tx
        dy = gy - tcy
        q = (dx * dx + dy * dy) / (rad * rad)
        talpha = _smootherstep(1.0 - q)
        img = img * (1.0 - talpha) + tcol * talpha
        return img


def build_procedural_generator(
    spec: LatentSpec, output_shape: tuple, seed: int = 0
) -> GeneratorHandle:
    """Deterministic differentiable scene generator used as a test oracle."""
    if spec.kind != LatentKind.SPHERICAL_Z:
        raise SpecMismatchError("the procedural oracle uses spherical latents")
    c, h, w = output_shape
    if c != 3:
        raise SpecMismatchError("the procedural oracle renders 3-channel images")
    module = ProceduralSceneModule(spec.dim, h, w, seed)
    return GeneratorHandle(
        kind=GeneratorKind.PROCEDURAL_ORACLE,
        latent_spec=spec,
        output_shape=(c, h, w),
        module=module,
        meta={"seed": seed},
    )


def oracle_part_boxes(G: GeneratorHandle, z: LatentCode | None = None, margin: float = 0.0) -> dict:
    """(y0, y1, x0, x1) unit-canvas boxes per part.

    Without ``z``: the maximal regions each part can ever occupy. With a
    scene latent: that scene's tight boxes (dilated by ``margin``).
    """
    if G.kind != GeneratorKind.PROCEDURAL_ORACLE:
        raise SpecMismatchError("part boxes are defined for the procedural oracle")
    if z is None:
        return dict(ProceduralSceneModule.PART_BOXES)
    params = G.module.part_params(z.flat())
    b, t = params["building"], params["tree"]
    boxes = {
        "building": (
            float(b["top_y"][0]),
            1.0,
            float(b["cx"][0] - b["half_w"][0]),
            float(b["cx"][0] + b["half_w"][0]),
        ),
        "tree": (
            float(t["cy"][0] - t["radius"][0]),
            float(t["cy"][0] + t["radius"][0]),
            float(t["cx"][0] - t["radius"][0]),
            float(t["cx"][0] + t["radius"][0]),
        ),
    }
    if margin:
        boxes = {
            k: (y0 - margin, y1 + margin, x0 - margin, x1 + margin)
            for k, (y0, y1, x0, x1) in boxes.items()
        }
    return boxes


def oracle_part_masks(
    G: GeneratorHandle,
    parts=("background", "building", "tree"),
    z: LatentCode | None = None,
    margin: float = 0.0,
) -> dict:
    """Binary (1, H, W) masks of the oracle's per-part regions.

    Together the default parts partition the canvas: "background" is the
    complement of the building and tree boxes. Passing a scene latent
    yields that scene's tight boxes instead of the maximal ones.
    """
    boxes = oracle_part_boxes(G, z=z, margin=margin)
    _, h, w = G.output_shape
    ys = (np.arange(h) + 0.5) / h
    xs = (np.arange(w) + 0.5) / w

    def box_mask(box):
        y0, y1, x0, x1 = box
        m = (ys[:, None] >= y0) & (ys[:, None] <= y1) & (xs[None, :] >= x0) & (xs[None, :] <= x1)
        return m[None].astype(np.float32)

    rendered = {k: box_mask(v) for k, v in boxes.items()}
    out = {}
    for part in parts:
        if part == "background":
            bg = np.ones((1, h, w), dtype=np.float32)
            for m in rendered.values():
                bg = bg * (1.0 - m)
            out[part] = bg
        else:
            out[part] = rendered[part]
    return out


# ---------------------------------------------------------------------------
# Toy adversarial generator
# ---------------------------------------------------------------------------

class ToyGeneratorModule(nn.Module):
    """Transposed-conv stack from a latent to a tanh image.

    Spherical latents pass through an input pixel-normalization layer, so
    the render only depends on the latent's direction. Per-layer latents
    (W+) instead modulate each upsampling block with a per-channel
    scale/shift computed from that layer's vector.
    """

    def __init__(self, spec: LatentSpec, size: int, base_channels: int, *, rng):
        if size not in (32, 64):
            raise ValueError("toy generator renders 32x32 or 64x64 images")
        self.spec = spec
        self.size = size
        n_up = 3 if size == 32 else 4
        if spec.kind == LatentKind.PER_LAYER_W and spec.num_layers != n_up + 1:
            raise SpecMismatchError(
                f"per-layer spec needs num_layers == {n_up + 1} for size {size}"
            )
        b = base_channels
        chans = [b * 4] + [max(b * 4 // (2**i), 8) for i in range(1, n_up + 1)]
        self.pixel_norm = nn.PixelNorm(axis=1)
        self.stem = nn.Dense(spec.dim, chans[0] * 16, rng=rng)
        self.blocks = [
            nn.ConvTranspose2d(chans[i], chans[i + 1], 4, stride=2, pad=1, rng=rng)
            for i in range(n_up)
        ]
        if spec.kind == LatentKind.PER_LAYER_W:
            self.styles = [nn.Dense(spec.dim, chans[i + 1] * 2, rng=rng) for i in range(n_up)]
        else:
            self.styles = []
        self.to_rgb = nn.Conv2d(chans[-1], 3, 3, stride=1, pad=1, gain=1.0, rng=rng)

    def __call__(self, z_flat: Tensor) -> Tensor:
        n = z_flat.shape[0]
        if self.spec.kind == LatentKind.SPHERICAL_Z:
            w0 = self.pixel_norm(z_flat)
            layers = None
        else:
            stacked = ad.reshape(z_flat, (n, self.spec.num_layers, self.spec.dim))
            w0 = stacked[:, 0]
            layers = stacked
        h = self.stem(w0)
        c0 = self.stem.weight.shape[1] // 16
        h = ad.leaky_relu(ad.reshape(h, (n, c0, 4, 4)))
        for i, block in enumerate(self.blocks):
            h = block(h)
            if layers is not None:
                style = self.styles[i](layers[:, i + 1])
                co = style.shape[1] // 2
                scale = ad.reshape(style[:, :co], (n, co, 1, 1))
                shift = ad.reshape(style[:, co:], (n, co, 1, 1))
                h = h * (1.0 + scale) + shift
            h = ad.leaky_relu(h)
        return ad.tanh(self.to_rgb(h))


class ToyDiscriminatorModule(nn.Module):
    def __init__(self, size: int, base_channels: int, *, rng):
        b = base_channels
        n_down = 3 if size == 32 else 4
        chans = [3] + [min(b * (2**i), b * 4) for i in range(n_down)]
        self.blocks = [
            nn.Conv2d(chans[i], chans[i + 1], 4, stride=2, pad=1, rng=rng)
            for i in range(n_down)
        ]
        spatial = size // (2**n_down)
        self.head = nn.Dense(chans[-1] * spatial * spatial, 1, gain=1.0, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for block in self.blocks:
            h = ad.leaky_relu(block(h))
        n = h.shape[0]
        return self.head(ad.reshape(h, (n, -1)))


@dataclass
class ToyGanConfig:
    steps: int
    latent_spec: LatentSpec
    output_shape: tuple = (3, 32, 32)
    batch_size: int = 16
    learning_rate: float = 2e-4
    beta1: float = 0.5
    base_channels: int = 16
    seed: int = 0


def build_toy_generator(
    spec: LatentSpec, output_shape: tuple = (3, 32, 32), base_channels: int = 16, seed: int = 0
) -> GeneratorHandle:
    """Untrained toy generator; architecture already honors the range contract."""
    c, h, w = output_shape
    if c != 3 or h != w:
        raise SpecMismatchError("toy generator renders square 3-channel images")
    rng = np.random.default_rng(seed)
    module = ToyGeneratorModule(spec, h, base_channels, rng=rng)
    return GeneratorHandle(
        kind=GeneratorKind.TOY_ADVERSARIAL,
        latent_spec=spec,
        output_shape=(c, h, w),
        module=module,
        meta={"seed": seed, "base_channels": base_channels, "train_steps": 0},
    )


def _softplus_mean(t: Tensor) -> Tensor:
    return ad.mean(ad.softplus(t))


def train_toy_generator(
    dataset: ImageBatch, config: ToyGanConfig, out_dir=None
) -> tuple[GeneratorHandle, list[dict]]:
    """Adversarial training of the toy generator on an image set.

    Returns a frozen handle plus the per-step loss history; the history is
    also written to ``gan_history.jsonl`` when ``out_dir`` is given.
    """
    c, h, w = config.output_shape
    if dataset.values.shape[1:] != (c, h, w):
        raise SpecMismatchError(
            f"dataset shape {dataset.values.shape[1:]} does not match {config.output_shape}"
        )
    rng = np.random.default_rng(config.seed)
    gen = ToyGeneratorModule(config.latent_spec, h, config.base_channels, rng=rng)
    disc = ToyDiscriminatorModule(h, config.base_channels, rng=rng)
    opt_g = nn.Adam(gen.parameters(), lr=config.learning_rate, betas=(config.beta1, 0.999))
    opt_d = nn.Adam(disc.parameters(), lr=config.learning_rate, betas=(config.beta1, 0.999))
    history: list[dict] = []
    data = dataset.values

    for step in range(config.steps):
        idx = rng.integers(0, data.shape[0], size=config.batch_size)
        real = Tensor(data[idx])
        z = sample_latent_rng(config.latent_spec, config.batch_size, rng)

        # discriminator update (generator output treated as data)
        with ad.no_grad():
            fake_data = gen(Tensor(z.flat())).data
        d_loss = _softplus_mean(-disc(real)) + _softplus_mean(disc(Tensor(fake_data)))
        disc.zero_grad()
        d_loss.backward()
        opt_d.step()

        # generator update (discriminator weights get grads too; just discard)
        fake = gen(Tensor(z.flat()))
        g_loss = _softplus_mean(-disc(fake))
        gen.zero_grad()
        disc.zero_grad()
        g_loss.backward()
        opt_g.step()
        disc.zero_grad()

        d_val, g_val = float(d_loss.data), float(g_loss.data)
        if not (np.isfinite(d_val) and np.isfinite(g_val)):
            raise TrainingDivergedError(f"non-finite GAN loss at step {step}", step=step)
        history.append({"step": step, "d_loss": d_val, "g_loss": g_val})

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "gan_history.jsonl", "w") as f:
            for row in history:
                f.write(json.dumps(row) + "\n")

    handle = GeneratorHandle(
        kind=GeneratorKind.TOY_ADVERSARIAL,
        latent_spec=config.latent_spec,
        output_shape=config.output_shape,
        module=gen,
        meta={
            "seed": config.seed,
            "base_channels": config.base_channels,
            "train_steps": config.steps,
        },
    )
    return handle, history


def synthetic_rectangles(count: int, size: int = 32, seed: int = 0) -> ImageBatch:
    """Small scene dataset: gradient sky plus one or two colored rectangles."""
    rng = np.random.default_rng(seed)
    ys = np.linspace(0.0, 1.0, size)[None, :, None]
    images = np.zeros((count, 3, size, size), dtype=np.float32)
    for i in range(count):
        top = rng.uniform(-0.8, 0.8, size=3)
        bot = rng.uniform(-0.8, 0.8, size=3)
        img = top[:, None, None] + (bot - top)[:, None, None] * ys
        for _ in range(rng.integers(1, 3)):
            y0, x0 = rng.integers(0, size // 2, size=2)
            hgt = rng.integers(size // 4, size // 2)
            wdt = rng.integers(size // 4, size // 2)
            color = rng.uniform(-0.8, 0.8, size=3)
            img[:, y0 : y0 + hgt, x0 : x0 + wdt] = color[:, None, None]
        images[i] = img
    return ImageBatch(images)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_IMPORTED_LOADERS: dict = {}


def register_imported_loader(name: str, loader) -> None:
    """Hook for adapters around externally trained generators."""
    _IMPORTED_LOADERS[name] = loader


def load_generator(path) -> GeneratorHandle:
    meta, arrays = load_checkpoint(path)
    kind = GeneratorKind(meta["kind"])
    spec = LatentSpec.from_json(meta["latent_spec"])
    output_shape = tuple(meta["output_shape"])
    if kind == GeneratorKind.PROCEDURAL_ORACLE:
        handle = build_procedural_generator(spec, output_shape, seed=meta["seed"])
    elif kind == GeneratorKind.TOY_ADVERSARIAL:
        handle = build_toy_generator(
            spec, output_shape, base_channels=meta["base_channels"], seed=meta["seed"]
        )
        handle.meta["train_steps"] = meta.get("train_steps", 0)
    else:
        loader = _IMPORTED_LOADERS.get(meta.get("adapter", ""))
        if loader is None:
            raise CheckpointError(
                "no adapter registered for imported generator "
                f"{meta.get('adapter', '<unset>')!r}"
            )
        return loader(meta, arrays)
    handle.module.load_arrays(arrays)
    return handle
