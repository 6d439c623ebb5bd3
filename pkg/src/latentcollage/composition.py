"""Collage assembly and re-projection through the encoder/generator pair.

A collage stacks masked image parts back-to-front; re-encoding the result
(with the union mask) projects it onto the generator's manifold in one
forward pass. An optional gradient refinement polishes the latent against
the masked target.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import images as im
from .autodiff import Tensor
from .errors import (
    EmptyMaskError,
    OptimizationDivergedError,
    ShapeMismatchError,
    SpecMismatchError,
)
from .features import perceptual_distance_t
from .generators import GeneratorHandle, GeneratorKind, generate
from .images import ImageBatch
from .latent import LatentCode, sample_latent_rng
from .masking import Mask
from .regressor import EncoderHandle, encode


@dataclass
class CollageLayer:
    image: ImageBatch  # single image
    part_mask: Mask  # single mask, same spatial size
    z_order: int = 0

    def __post_init__(self):
        if self.image.batch != 1 or self.part_mask.batch != 1:
            raise ShapeMismatchError("collage layers hold exactly one image and one mask")
        if self.image.values.shape[2:] != self.part_mask.values.shape[2:]:
            raise ShapeMismatchError("layer image and mask spatial sizes differ")


@dataclass
class CollageSpec:
    layers: list
    canvas_shape: tuple  # (channels, height, width)

    def __post_init__(self):
        if not self.layers:
            raise ShapeMismatchError("a collage needs at least one layer")
        c, h, w = self.canvas_shape
        for layer in self.layers:
            if layer.image.values.shape[1:] != (c, h, w):
                raise ShapeMismatchError(
                    f"layer shape {layer.image.values.shape[1:]} != canvas {self.canvas_shape}"
                )


@dataclass(frozen=True)
class PartOrderPreset:
    domain_name: str
    classes: tuple

    def __post_init__(self):
        if not self.classes:
            raise ValueError("a preset needs at least one class")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("preset classes must be unique")


PRESETS = {
    "oracle-scene": PartOrderPreset("oracle-scene", ("background", "building", "tree")),
    "church": PartOrderPreset("church", ("sky", "building", "tree", "foreground")),
    "living-room": PartOrderPreset(
        "living-room",
        ("floor", "ceiling", "wall", "painting", "window", "fireplace", "sofa", "coffee_table"),
    ),
    "car": PartOrderPreset("car", ("sky", "building", "tree", "foreground", "car")),
    "face": PartOrderPreset("face", ("background", "skin", "eye", "mouth", "nose", "hair")),
}


def assemble_collage(spec: CollageSpec) -> tuple[ImageBatch, Mask]:
    """Paint layers back-to-front; overlaps go to the higher z_order layer.

    Pixels outside the union of part masks are exactly 0. Equal z_order
    resolves by list position (stable sort).
    """
    c, h, w = spec.canvas_shape
    canvas = np.zeros((1, c, h, w), dtype=np.float32)
    union = np.zeros((1, 1, h, w), dtype=np.float32)
    for layer in sorted(spec.layers, key=lambda l: l.z_order):
        m = layer.part_mask.values
        canvas = canvas * (1.0 - m) + layer.image.values * m
        union = np.maximum(union, m)
    canvas = canvas * union
    return ImageBatch(canvas), Mask(union)


def compose_detailed(
    E: EncoderHandle,
    G: GeneratorHandle,
    spec: CollageSpec,
    refine_steps: int = 0,
    refine_lr: float = 0.05,
) -> dict:
    """Collage re-projection returning composite, latent, collage, and union mask."""
    x_clg, m_union = assemble_collage(spec)
    if E.config.input_channels == 4:
        z = encode(E, x_clg, m_union)
    else:
        z = encode(E, x_clg)
    if refine_steps > 0:
        z = refine_latent(G, z, x_clg, m_union, steps=refine_steps, lr=refine_lr)
    composite = generate(G, z)
    return {"composite": composite, "latent": z, "collage": x_clg, "union_mask": m_union}


def compose(E: EncoderHandle, G: GeneratorHandle, spec: CollageSpec) -> ImageBatch:
    """Single forward pass through encoder and generator; no optimization."""
    return compose_detailed(E, G, spec)["composite"]


def _masked_objective_t(G, z_t: Tensor, target: np.ndarray, m: np.ndarray, p_weight: float):
    x_hat = G.forward_tensor(z_t)
    xt = Tensor(target)
    mt = Tensor(m)
    diff = (x_hat - xt) * mt
    areas = m.sum(axis=(1, 2, 3)) * target.shape[1]  # per-sample known pixels x channels
    mse = ad.sum_(diff * diff, axis=(1, 2, 3)) / areas.astype(np.float32)
    per = perceptual_distance_t(x_hat * mt, xt * mt)
    return mse + per * p_weight


def refine_latent(
    G: GeneratorHandle,
    z_init: LatentCode,
    target: ImageBatch,
    m: Mask,
    steps: int,
    lr: float = 0.05,
    perceptual_weight: float = 1.0,
) -> LatentCode:
    """Gradient descent on the masked image distance, keeping the best iterate.

    The reported objective is therefore non-increasing in ``steps``;
    ``steps == 0`` returns the initial code unchanged.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if z_init.spec != G.latent_spec:
        raise SpecMismatchError("latent spec does not match the generator")
    if np.any(m.values.sum(axis=(1, 2, 3)) == 0):
        raise EmptyMaskError("refinement needs at least one known pixel per sample")
    if steps == 0:
        return LatentCode(z_init.spec, z_init.values.copy())

    z_t = Tensor(z_init.flat().astype(np.float32).copy(), requires_grad=True)
    from .nn import Adam

    opt = Adam([z_t], lr=lr, betas=(0.9, 0.999))
    with ad.no_grad():
        best_vals = _masked_objective_t(
            G, z_t, target.values, m.values, perceptual_weight
        ).data.copy()
    best_z = z_t.data.copy()
    for step in range(steps):
        obj = _masked_objective_t(G, z_t, target.values, m.values, perceptual_weight)
        total = ad.mean(obj)
        if not np.isfinite(float(total.data)):
            raise OptimizationDivergedError(f"non-finite refinement objective at step {step}")
        z_t.grad = None
        total.backward()
        opt.step()
        with ad.no_grad():
            vals = _masked_objective_t(
                G, z_t, target.values, m.values, perceptual_weight
            ).data
        better = vals < best_vals
        best_vals = np.where(better, vals, best_vals)
        best_z[better] = z_t.data[better]
    spec = z_init.spec
    return LatentCode(spec, best_z.reshape(-1, spec.num_layers, spec.dim))


def refine_init_best_of_k(
    G: GeneratorHandle,
    target: ImageBatch,
    m: Mask,
    k: int,
    seed: int = 0,
    perceptual_weight: float = 1.0,
) -> LatentCode:
    """Best-of-k random starting point for refinement (lowest masked distance)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    n = target.batch
    best_vals = None
    best = None
    for _ in range(k):
        z = sample_latent_rng(G.latent_spec, n, rng)
        z_t = Tensor(z.flat())
        with ad.no_grad():
            vals = _masked_objective_t(
                G, z_t, target.values, m.values, perceptual_weight
            ).data.copy()
        if best_vals is None:
            best_vals, best = vals, z.values.copy()
        else:
            better = vals < best_vals
            best_vals = np.where(better, vals, best_vals)
            best[better] = z.values[better]
    return LatentCode(G.latent_spec, best)


# ---------------------------------------------------------------------------
# Part sources and random collages
# ---------------------------------------------------------------------------

class RectanglePartSource:
    """Axis-aligned random rectangles; listed classes get a full mask."""

    def __init__(self, min_frac: float = 0.25, max_frac: float = 0.6, full_classes=("background", "sky", "floor")):
        self.min_frac = min_frac
        self.max_frac = max_frac
        self.full_classes = set(full_classes)

    def sample(self, class_name: str, context: dict, rng: np.random.Generator) -> np.ndarray:
        h, w = context["image"].shape[1:]
        if class_name in self.full_classes:
            return np.ones((1, h, w), dtype=np.float32)
        mh = int(rng.uniform(self.min_frac, self.max_frac) * h)
        mw = int(rng.uniform(self.min_frac, self.max_frac) * w)
        y0 = int(rng.integers(0, max(h - mh, 1)))
        x0 = int(rng.integers(0, max(w - mw, 1)))
        mask = np.zeros((1, h, w), dtype=np.float32)
        mask[:, y0 : y0 + mh, x0 : x0 + mw] = 1.0
        return mask


class MaskFolderPartSource:
    """User-supplied PNG masks, one file (or folder of files) per class."""

    def __init__(self, root):
        self.root = Path(root)

    def sample(self, class_name: str, context: dict, rng: np.random.Generator) -> np.ndarray:
        single = self.root / f"{class_name}.png"
        if single.is_file():
            return im.load_mask_png(single)[None]
        folder = self.root / class_name
        candidates = sorted(folder.glob("*.png")) if folder.is_dir() else []
        if not candidates:
            raise FileNotFoundError(f"no mask for part class {class_name!r} under {self.root}")
        pick = candidates[int(rng.integers(0, len(candidates)))]
        return im.load_mask_png(pick)[None]


class OracleBlockPartSource:
    """Part masks aligned with the procedural oracle's latent blocks.

    Foreground classes get the donor scene's tight part box (computed from
    its latent); the background class gets the complement of the maximal
    part boxes, which leaves a gap of genuinely unknown pixels around the
    parts.
    """

    def __init__(self, G: GeneratorHandle):
        if G.kind != GeneratorKind.PROCEDURAL_ORACLE:
            raise SpecMismatchError("OracleBlockPartSource needs the procedural oracle")
        self.G = G

    def sample(self, class_name: str, context: dict, rng: np.random.Generator) -> np.ndarray:
        _, h, w = self.G.output_shape
        boxes = self.G.module.PART_BOXES
        if class_name == "background":
            mask = np.ones((1, h, w), dtype=np.float32)
            for box in boxes.values():
                mask -= mask * self._box_mask(box, h, w)
            return np.clip(mask, 0.0, 1.0)
        if class_name not in boxes:
            raise KeyError(f"oracle has no part class {class_name!r}")
        z = context.get("latent")
        if z is None:
            return self._box_mask(boxes[class_name], h, w)
        params = self.G.module.part_params(z.flat())
        p = params[class_name]
        if class_name == "building":
            box = (float(p["top_y"][0]), 1.0, float(p["cx"][0] - p["half_w"][0]), float(p["cx"][0] + p["half_w"][0]))
        else:
            box = (
                float(p["cy"][0] - p["radius"][0]),
                float(p["cy"][0] + p["radius"][0]),
                float(p["cx"][0] - p["radius"][0]),
                float(p["cx"][0] + p["radius"][0]),
            )
        return self._box_mask(box, h, w)

    @staticmethod
    def _box_mask(box, h, w) -> np.ndarray:
        y0, y1, x0, x1 = box
        ys = (np.arange(h) + 0.5) / h
        xs = (np.arange(w) + 0.5) / w
        m = (ys[:, None] >= y0) & (ys[:, None] <= y1) & (xs[None, :] >= x0) & (xs[None, :] <= x1)
        return m[None].astype(np.float32)


def random_collage(source, part_source, preset: PartOrderPreset, seed: int = 0) -> CollageSpec:
    """One random layer per preset class, layered back-to-front.

    ``source`` is either a generator handle (classes draw fresh samples) or
    an ImageBatch pool (classes draw pool members).
    """
    rng = np.random.default_rng(seed)
    layers = []
    if isinstance(source, GeneratorHandle):
        canvas_shape = source.output_shape
    else:
        canvas_shape = tuple(source.values.shape[1:])
    for order, class_name in enumerate(preset.classes):
        if isinstance(source, GeneratorHandle):
            z = sample_latent_rng(source.latent_spec, 1, rng)
            img = generate(source, z)
            context = {"image": img.single(), "latent": z}
        else:
            idx = int(rng.integers(0, source.values.shape[0]))
            img = ImageBatch(source.values[idx : idx + 1].copy())
            context = {"image": img.single(), "latent": None}
        try:
            mask = part_source.sample(class_name, context, rng)
        except Exception as e:
            raise RuntimeError(f"part source failed for class {class_name!r}: {e}") from e
        layers.append(CollageLayer(image=img, part_mask=Mask(mask[None]), z_order=order))
    return CollageSpec(layers=layers, canvas_shape=canvas_shape)


# ---------------------------------------------------------------------------
# JSON wire format shared by the CLI, service, and UI
# ---------------------------------------------------------------------------

def _encode_ref(chw: np.ndarray, is_mask: bool) -> str:
    if is_mask:
        return im.b64_mask_png(chw[0])
    return im.b64_png(chw)


def _decode_ref(ref: str, base_dir, is_mask: bool) -> np.ndarray:
    candidate = Path(ref)
    if not candidate.is_absolute() and base_dir is not None:
        candidate = Path(base_dir) / ref
    if candidate.is_file():
        return im.load_mask_png(candidate)[None] if is_mask else im.load_png(candidate)
    try:
        data = base64.b64decode(ref, validate=True)
    except Exception as e:
        raise ValueError(f"layer reference is neither an existing file nor base64: {ref[:48]}") from e
    if is_mask:
        return im.mask_from_png_bytes(data)[None]
    return im.from_png_bytes(data)


def collage_spec_to_json(spec: CollageSpec) -> dict:
    """Embed layer images/masks as base64 PNG."""
    return {
        "canvas": list(spec.canvas_shape),
        "layers": [
            {
                "image": _encode_ref(layer.image.single(), is_mask=False),
                "mask": _encode_ref(layer.part_mask.values[0], is_mask=True),
                "z_order": layer.z_order,
            }
            for layer in spec.layers
        ],
    }


def collage_spec_from_json(doc: dict, base_dir=None) -> CollageSpec:
    """Accepts base64-embedded payloads or file paths (resolved from base_dir)."""
    canvas = tuple(int(v) for v in doc["canvas"])
    layers = []
    for entry in doc["layers"]:
        img = _decode_ref(entry["image"], base_dir, is_mask=False)
        mask = _decode_ref(entry["mask"], base_dir, is_mask=True)
        layers.append(
            CollageLayer(
                image=ImageBatch(img[None]),
                part_mask=Mask(mask[None]),
                z_order=int(entry.get("z_order", 0)),
            )
        )
    return CollageSpec(layers=layers, canvas_shape=canvas)
