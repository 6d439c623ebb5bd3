"""Probes of the encoder/generator pair: composition vs. latent and pixel
interpolation, part-independence statistics, one-shot edit-vector
transfer, and per-image encoder finetuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn, rngs
from .autodiff import Tensor
from .errors import OverlappingRegionsError, TrainingDivergedError
from .generators import GeneratorHandle, generate
from .images import ImageBatch
from .latent import LatentCode, LatentKind, normalize_latent, sample_latent_rng
from .masking import Mask, ones_mask
from .metrics import masked_l1
from .regressor import EncoderHandle, encode, total_loss_t


@dataclass
class BlendResult:
    composition: ImageBatch
    latent_blend: ImageBatch
    pixel_blend: ImageBatch
    alpha: float
    distances: dict  # method -> {to_context, to_target, to_collage}


def alpha_from_area(m_target: Mask) -> float:
    """Interpolation weight for the context image: shrinks as the target grows."""
    total = float(np.prod(m_target.values.shape[2:])) * m_target.batch
    return 1.0 - float(m_target.values.sum()) / total


def _encode_full(E: EncoderHandle, x: ImageBatch) -> LatentCode:
    if E.config.input_channels == 4:
        h, w = x.values.shape[2:]
        return encode(E, x, ones_mask(h, w, x.batch))
    return encode(E, x)


def blend_compare(
    E: EncoderHandle,
    G: GeneratorHandle,
    x1: ImageBatch,
    x2: ImageBatch,
    m2: Mask,
    m1: Mask | None = None,
    alpha: float | None = None,
) -> BlendResult:
    """Compare collage composition against latent and pixel alpha-blends.

    ``m2`` marks the target-modification region; ``m1`` defaults to its
    complement. All three outputs are measured with masked L1 against the
    context region, the target region, and the collage itself.
    """
    if m1 is None:
        m1 = Mask(1.0 - m2.values)
    if float((m1.values * m2.values).sum()) > 0:
        raise OverlappingRegionsError("context and target regions overlap")
    union = Mask(np.maximum(m1.values, m2.values))
    collage_vals = m1.values * x1.values + m2.values * x2.values
    collage = ImageBatch(collage_vals)

    if alpha is None:
        alpha = alpha_from_area(m2)

    if E.config.input_channels == 4:
        z_comp = encode(E, collage, union)
    else:
        z_comp = encode(E, collage)
    composition = generate(G, z_comp)

    z1 = _encode_full(E, x1)
    z2 = _encode_full(E, x2)
    z_mix = LatentCode(z1.spec, alpha * z1.values + (1.0 - alpha) * z2.values)
    latent_blend = generate(G, z_mix)

    pixel_mix = ImageBatch(alpha * x1.values + (1.0 - alpha) * x2.values)
    pixel_blend = generate(G, _encode_full(E, pixel_mix))

    def dists(out: ImageBatch) -> dict:
        return {
            "to_context": masked_l1(out, x1, m1) if m1.values.sum() else None,
            "to_target": masked_l1(out, x2, m2) if m2.values.sum() else None,
            "to_collage": masked_l1(out, collage, union) if union.values.sum() else None,
        }

    return BlendResult(
        composition=composition,
        latent_blend=latent_blend,
        pixel_blend=pixel_blend,
        alpha=alpha,
        distances={
            "composition": dists(composition),
            "latent_blend": dists(latent_blend),
            "pixel_blend": dists(pixel_blend),
        },
    )


# ---------------------------------------------------------------------------
# Part independence
# ---------------------------------------------------------------------------

@dataclass
class IndependenceReport:
    component_id: str
    sigma_map: np.ndarray  # [C, H, W], averaged over repeats
    variation_map: np.ndarray  # [C, H, W], averaged over repeats
    score: float  # mean variation outside the part (lower = more independent)
    n_replacements: int
    n_repeats: int


def part_independence(
    E: EncoderHandle,
    G: GeneratorHandle,
    x: ImageBatch,
    parts: list,
    n_replacements: int = 20,
    repeats: int = 100,
    seed: int = 0,
    replacement_mode: str = "part",
) -> list:
    """Measure how much replacing each part changes pixels outside it.

    For every part c and repeat: draw N fresh samples, splice their
    ``m_c`` region into ``x``, re-encode (full-ones mask) and re-generate,
    and take the pixelwise std over the N outcomes. Variation maps are the
    per-part share of total std; the score averages the share outside the
    part over sigma-supported pixels. ``replacement_mode="full"`` swaps
    whole images instead (the uniform-leakage baseline) while keeping the
    part mask for the outside-region average.
    """
    if n_replacements < 2:
        raise ValueError("need at least 2 replacements for a standard deviation")
    if replacement_mode not in ("part", "full"):
        raise ValueError("replacement_mode must be 'part' or 'full'")
    if x.batch != 1:
        raise ValueError("part_independence probes a single image")
    rng = rngs.stream(seed, "independence")
    _, h, w = G.output_shape
    masks = []
    for cid, m in parts:
        arr = m.values[0] if isinstance(m, Mask) else np.asarray(m, dtype=np.float32)
        masks.append((cid, arr.reshape(1, h, w)))

    sigma_sums = {cid: np.zeros((3, h, w), dtype=np.float64) for cid, _ in masks}
    v_sums = {cid: np.zeros((3, h, w), dtype=np.float64) for cid, _ in masks}
    scores = {cid: 0.0 for cid, _ in masks}

    full = ones_mask(h, w, n_replacements)
    for _ in range(repeats):
        sigmas = {}
        for cid, m_c in masks:
            z_n = sample_latent_rng(G.latent_spec, n_replacements, rng)
            x_n = generate(G, z_n).values
            splice = m_c if replacement_mode == "part" else np.ones_like(m_c)
            collage = ImageBatch(splice * x_n + (1.0 - splice) * x.values)
            z_hat = encode(E, collage, full) if E.config.input_channels == 4 else encode(E, collage)
            x_cn = generate(G, z_hat).values
            sigmas[cid] = x_cn.std(axis=0)  # population std over the N replacements
        denom = np.zeros_like(next(iter(sigmas.values())))
        for s in sigmas.values():
            denom = denom + s
        # float32 std of identical renders leaves ~1e-8 noise; that is not support
        support = denom > 1e-6
        for cid, m_c in masks:
            v = np.zeros_like(sigmas[cid])
            v[support] = sigmas[cid][support] / denom[support]
            outside = (1.0 - m_c) * v
            n_valid = support.sum()
            scores[cid] += float(outside[support].sum() / n_valid) if n_valid else 0.0
            sigma_sums[cid] += sigmas[cid]
            v_sums[cid] += v
    reports = []
    for cid, _ in masks:
        reports.append(
            IndependenceReport(
                component_id=cid,
                sigma_map=(sigma_sums[cid] / repeats).astype(np.float32),
                variation_map=(v_sums[cid] / repeats).astype(np.float32),
                score=scores[cid] / repeats,
                n_replacements=n_replacements,
                n_repeats=repeats,
            )
        )
    return reports


def edit_vector_transfer(
    E: EncoderHandle,
    G: GeneratorHandle,
    x1: ImageBatch,
    x1_modified: ImageBatch,
    x2: ImageBatch,
) -> ImageBatch:
    """Apply the latent difference of an edit on x1 to a second image x2."""
    e1 = _encode_full(E, x1)
    e1m = _encode_full(E, x1_modified)
    e2 = _encode_full(E, x2)
    z_new = LatentCode(e1.spec, e1m.values - e1.values + e2.values)
    if z_new.spec.kind == LatentKind.SPHERICAL_Z:
        z_new = normalize_latent(z_new)
    return generate(G, z_new)


def finetune_encoder(
    E: EncoderHandle,
    G: GeneratorHandle,
    x: ImageBatch,
    steps: int = 30,
    lr: float = 1e-4,
) -> EncoderHandle:
    """Specialize a copy of the encoder to one image; the original is untouched.

    Optimizes the full-mask reconstruction loss (image + perceptual terms;
    there is no ground-truth latent for an arbitrary image) and returns the
    iterate with the lowest full-mask masked L1, the starting weights
    included, so reconstruction never gets worse.
    """
    if x.batch != 1:
        raise ValueError("finetune_encoder specializes to a single image")
    copy = E.clone()
    if steps == 0:
        return copy
    h, w = x.values.shape[2:]
    m = ones_mask(h, w, 1)
    weights = {**copy.config.loss_weights, "latent": 0.0}
    if weights["image_mse"] == 0.0 and weights["perceptual"] == 0.0:
        weights["image_mse"] = 1.0
    opt = nn.Adam(copy.module.parameters(), lr=lr)

    def recon_l1() -> float:
        z = encode(E=copy, x_m=x, m=m) if copy.config.input_channels == 4 else encode(copy, x)
        return masked_l1(generate(G, z), x, m)

    best_l1 = recon_l1()
    best_arrays = copy.module.export_arrays()
    for step in range(steps):
        loss, breakdown = total_loss_t(
            copy.module,
            G,
            Tensor(x.values),
            Tensor(np.zeros((1, copy.config.latent_spec.flat_dim), dtype=np.float32)),
            Tensor(m.values),
            weights,
            copy.config.input_channels,
            copy.config.latent_spec.kind,
        )
        if not np.isfinite(breakdown["total"]):
            raise TrainingDivergedError(f"non-finite finetune loss at step {step}", step=step)
        copy.module.zero_grad()
        loss.backward()
        opt.step()
        copy.module.zero_grad()
        l1 = recon_l1()
        if l1 < best_l1:
            best_l1 = l1
            best_arrays = copy.module.export_arrays()
    copy.module.load_arrays(best_arrays)
    copy.step_count = E.step_count + steps
    return copy
