"""Command-line entry point.

Option precedence is environment (LATENTCOLLAGE_<OPTION>) > explicit
flags > --config file > defaults. Every run writes ``run.json`` with the
resolved configuration into its output directory; artifacts follow the
fixed layout <out>/run.json, <out>/checkpoints/, <out>/samples/,
<out>/reports/.
"""

from __future__ import annotations

import json
import os
import time
from importlib.metadata import version as pkg_version
from pathlib import Path

import click
import numpy as np

from . import images as im
from . import rngs
from .analysis import blend_compare, part_independence
from .composition import (
    OracleBlockPartSource,
    PRESETS,
    RectanglePartSource,
    collage_spec_from_json,
    compose_detailed,
    random_collage,
)
from .errors import ExtractorMismatchError
from .generators import (
    build_procedural_generator,
    generate,
    load_generator,
    oracle_part_masks,
    synthetic_rectangles,
    train_toy_generator,
    ToyGanConfig,
)
from .images import ImageBatch
from .latent import LatentKind, LatentSpec, sample_latent
from .masking import Mask, ones_mask
from .metrics import (
    MetricsReport,
    extract_features,
    fid_delta,
    frechet_distance,
    density_coverage,
    masked_l1,
)
from .regressor import encode, load_encoder
from .training import Ablation, TrainConfig, train

_ENV_PREFIX = "LATENTCOLLAGE_"


def _resolve(ctx: click.Context, config_path) -> dict:
    """Apply env > flags > config file > defaults for this command's options."""
    file_values = {}
    if config_path:
        file_values = json.loads(Path(config_path).read_text())
    resolved = {}
    for name, value in ctx.params.items():
        if name == "config":
            continue
        source = ctx.get_parameter_source(name)
        if name in file_values and source == click.core.ParameterSource.DEFAULT:
            value = file_values[name]
        env_key = _ENV_PREFIX + name.upper()
        if env_key in os.environ:
            raw = os.environ[env_key]
            value = type(value)(raw) if value is not None and not isinstance(value, (tuple, list)) else raw
        resolved[name] = value
    return resolved


def _write_run_json(out_dir: Path, command: str, resolved: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "resolved": {k: (str(v) if isinstance(v, Path) else v) for k, v in resolved.items()},
        "package_version": pkg_version("latentcollage"),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(out_dir / "run.json", "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True, default=str)


@click.group()
def main():
    """Latent regression toolkit: train encoders, compose collages, evaluate."""


@main.command("make-generator")
@click.option("--kind", type=click.Choice(["procedural", "toy"]), default="procedural")
@click.option("--size", type=int, default=64)
@click.option("--dim", type=int, default=12)
@click.option("--seed", type=int, default=0)
@click.option("--train-steps", type=int, default=2000)
@click.option("--base-channels", type=int, default=16)
@click.option("--dataset-size", type=int, default=512)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.pass_context
def make_generator(ctx, kind, size, dim, seed, train_steps, base_channels, dataset_size, out, config):
    """Create a generator checkpoint (procedural oracle or trained toy GAN)."""
    r = _resolve(ctx, config)
    _write_run_json(r["out"], "make-generator", r)
    spec = LatentSpec(LatentKind.SPHERICAL_Z, r["dim"])
    if r["kind"] == "procedural":
        G = build_procedural_generator(spec, (3, r["size"], r["size"]), seed=r["seed"])
    else:
        data = synthetic_rectangles(r["dataset_size"], r["size"], seed=r["seed"])
        cfg = ToyGanConfig(
            steps=r["train_steps"],
            latent_spec=spec,
            output_shape=(3, r["size"], r["size"]),
            base_channels=r["base_channels"],
            seed=r["seed"],
        )
        G, _ = train_toy_generator(data, cfg, out_dir=r["out"])
    ckpt = Path(r["out"]) / "checkpoints" / "generator"
    G.save(ckpt)
    click.echo(f"generator checkpoint written to {ckpt}")


@main.command("train")
@click.option("--generator", "generator_path", type=click.Path(exists=True), required=True)
@click.option("--steps", type=int, required=True)
@click.option("--ablation", type=click.Choice([a.value for a in Ablation]), default="FULL")
@click.option("--batch-size", type=int, default=16)
@click.option("--learning-rate", type=float, default=1e-4)
@click.option("--mask-probability", type=float, default=0.5)
@click.option("--seed", type=int, default=0)
@click.option("--base-channels", type=int, default=16)
@click.option("--checkpoint-every", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.pass_context
def train_cmd(ctx, generator_path, steps, ablation, batch_size, learning_rate,
              mask_probability, seed, base_channels, checkpoint_every, out, config):
    """Train an encoder against a frozen generator checkpoint."""
    r = _resolve(ctx, config)
    _write_run_json(r["out"], "train", r)
    G = load_generator(r["generator_path"])
    cfg = TrainConfig(
        steps=int(r["steps"]),
        batch_size=int(r["batch_size"]),
        learning_rate=float(r["learning_rate"]),
        mask_probability=float(r["mask_probability"]),
        seed=int(r["seed"]),
        ablation=Ablation(r["ablation"]),
        checkpoint_every=int(r["checkpoint_every"]),
        base_channels=int(r["base_channels"]),
    )
    _, history = train(G, cfg, out_dir=r["out"])
    click.echo(
        f"trained {cfg.steps} steps; final loss {history[-1]['total']:.4f}; "
        f"encoder at {Path(r['out']) / 'encoder'}"
    )


@main.command("compose")
@click.option("--spec", "spec_path", type=click.Path(exists=True), required=True)
@click.option("--encoder", "encoder_path", type=click.Path(exists=True), required=True)
@click.option("--generator", "generator_path", type=click.Path(exists=True), required=True)
@click.option("--refine-steps", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def compose_cmd(spec_path, encoder_path, generator_path, refine_steps, out):
    """Re-project a collage spec through the encoder/generator pair."""
    doc = json.loads(Path(spec_path).read_text())
    spec = collage_spec_from_json(doc, base_dir=Path(spec_path).parent)
    E = load_encoder(encoder_path)
    G = load_generator(generator_path)
    result = compose_detailed(E, G, spec, refine_steps=refine_steps)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    im.save_png(out, result["composite"].single())
    click.echo(f"composite written to {out}")


@main.command("make-collages")
@click.option("--generator", "generator_path", type=click.Path(exists=True), required=True)
@click.option("--encoder", "encoder_path", type=click.Path(exists=True), required=True)
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default="oracle-scene")
@click.option("--part-source", type=click.Choice(["oracle-blocks", "rectangles"]), default="oracle-blocks")
@click.option("--count", type=int, default=200)
@click.option("--seed", type=int, default=0)
@click.option("--refine-steps", type=int, default=0)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.pass_context
def make_collages(ctx, generator_path, encoder_path, preset, part_source, count, seed,
                  refine_steps, out, config):
    """Generate (collage, union mask, composite) triples plus eval side sets."""
    r = _resolve(ctx, config)
    out = Path(r["out"])
    _write_run_json(out, "make-collages", r)
    G = load_generator(r["generator_path"])
    E = load_encoder(r["encoder_path"])
    preset_obj = PRESETS[r["preset"]]
    if r["part_source"] == "oracle-blocks":
        source = OracleBlockPartSource(G)
    else:
        source = RectanglePartSource()
    samples = out / "samples"
    for sub in ("collages", "masks", "composites", "reencoded", "reference"):
        (samples / sub).mkdir(parents=True, exist_ok=True)
    seed_root = int(r["seed"])
    count = int(r["count"])
    ref_rng = rngs.stream(seed_root, "collage-reference")
    manifest_rows = []
    for i in range(count):
        item_seed = int(rngs.stream(seed_root, f"collage-{i}").integers(0, 2**31 - 1))
        spec = random_collage(G, source, preset_obj, seed=item_seed)
        result = compose_detailed(E, G, spec, refine_steps=int(r["refine_steps"]))
        z_ref = sample_latent(G.latent_spec, 1, int(ref_rng.integers(0, 2**31 - 1)))
        reference = generate(G, z_ref)
        if E.config.input_channels == 4:
            h, w = reference.values.shape[2:]
            z_re = encode(E, reference, ones_mask(h, w, 1))
        else:
            z_re = encode(E, reference)
        reencoded = generate(G, z_re)
        row = {"index": i, "seed": item_seed}
        for name, subdir, chw in [
            ("collage", "collages", result["collage"].single()),
            ("composite", "composites", result["composite"].single()),
            ("reencoded", "reencoded", reencoded.single()),
            ("reference", "reference", reference.single()),
        ]:
            rel = f"samples/{subdir}/{i:05d}.png"
            im.save_png(out / rel, chw)
            row[name] = rel
        mask_rel = f"samples/masks/{i:05d}.png"
        im.save_mask_png(out / mask_rel, result["union_mask"].values[0, 0])
        row["mask"] = mask_rel
        manifest_rows.append(row)
    with open(out / "manifest.jsonl", "w") as f:
        for row in manifest_rows:
            f.write(json.dumps(row) + "\n")
    click.echo(f"{count} collage triples under {out}")


def _load_dir_images(path: Path) -> ImageBatch:
    files = sorted(Path(path).glob("*.png"))
    if not files:
        raise click.ClickException(f"no PNG files in {path}")
    return ImageBatch(np.stack([im.load_png(p) for p in files]))


@main.command("eval")
@click.option("--real", "real_dir", type=click.Path(exists=True), required=True)
@click.option("--fake", "fake_dir", type=click.Path(exists=True), required=True)
@click.option("--k", type=int, default=5)
@click.option("--extractor", "extractor_id", default="randconv64/v1")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def eval_cmd(real_dir, fake_dir, k, extractor_id, out_path):
    """Metrics report for a sample set against a reference set.

    --fake accepts a plain PNG directory or a make-collages output
    directory (detected by manifest.jsonl), which also yields masked L1
    and the FID-delta protocol columns.
    """
    real = _load_dir_images(Path(real_dir))
    real_feats = extract_features(real, extractor_id)
    fake_dir = Path(fake_dir)
    manifest = fake_dir / "manifest.jsonl"
    masked = fid_d = collage_fid_d = None
    if manifest.is_file():
        rows = [json.loads(line) for line in manifest.read_text().splitlines() if line.strip()]
        composites, collages, reencoded, l1s = [], [], [], []
        for row in rows:
            comp = im.load_png(fake_dir / row["composite"])
            clg = im.load_png(fake_dir / row["collage"])
            mask = im.load_mask_png(fake_dir / row["mask"])
            reencoded.append(im.load_png(fake_dir / row["reencoded"]))
            composites.append(comp)
            collages.append(clg)
            l1s.append(
                masked_l1(
                    ImageBatch(clg[None]), ImageBatch(comp[None]), Mask(mask[None, None])
                )
            )
        fake = ImageBatch(np.stack(composites))
        fake_feats = extract_features(fake, extractor_id)
        reenc_feats = extract_features(ImageBatch(np.stack(reencoded)), extractor_id)
        clg_feats = extract_features(ImageBatch(np.stack(collages)), extractor_id)
        masked = float(np.mean(l1s))
        fid_d = fid_delta(fake_feats, reenc_feats, real_feats)
        collage_fid_d = fid_delta(clg_feats, reenc_feats, real_feats)
    else:
        fake = _load_dir_images(fake_dir)
        fake_feats = extract_features(fake, extractor_id)
    density, coverage = density_coverage(real_feats, fake_feats, k=k)
    report = MetricsReport(
        masked_l1=masked,
        fid=frechet_distance(fake_feats, real_feats),
        fid_delta=fid_d,
        density=density,
        coverage=coverage,
        n_samples=fake_feats.n,
        k_neighbors=k,
        extractor_id=extractor_id,
        collage_fid_delta=collage_fid_d,
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as f:
        json.dump(report.to_json(), f, indent=2)
    click.echo(json.dumps(report.to_json(), indent=2))


@main.command("blend-compare")
@click.option("--context", "context_path", type=click.Path(exists=True), required=True)
@click.option("--target", "target_path", type=click.Path(exists=True), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True), required=True)
@click.option("--encoder", "encoder_path", type=click.Path(exists=True), required=True)
@click.option("--generator", "generator_path", type=click.Path(exists=True), required=True)
@click.option("--alpha", type=float, default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def blend_compare_cmd(context_path, target_path, mask_path, encoder_path, generator_path, alpha, out):
    """Composition vs. latent/pixel alpha-blends for one context/target pair."""
    E = load_encoder(encoder_path)
    G = load_generator(generator_path)
    x1 = ImageBatch(im.load_png(context_path)[None])
    x2 = ImageBatch(im.load_png(target_path)[None])
    m2 = Mask(im.load_mask_png(mask_path)[None, None])
    result = blend_compare(E, G, x1, x2, m2, alpha=alpha)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    im.save_png(out / "composition.png", result.composition.single())
    im.save_png(out / "latent_blend.png", result.latent_blend.single())
    im.save_png(out / "pixel_blend.png", result.pixel_blend.single())
    with open(out / "distances.json", "w") as f:
        json.dump({"alpha": result.alpha, "distances": result.distances}, f, indent=2)
    click.echo(f"blend comparison written to {out}")


@main.command("probe-independence")
@click.option("--image", "image_path", type=click.Path(exists=True), required=True)
@click.option("--parts", "parts_path", type=click.Path(exists=True), default=None,
              help="JSON file: {\"parts\": [{\"id\": ..., \"mask\": png path}]}")
@click.option("--oracle-parts", is_flag=True, help="use the procedural oracle's part boxes")
@click.option("--encoder", "encoder_path", type=click.Path(exists=True), required=True)
@click.option("--generator", "generator_path", type=click.Path(exists=True), required=True)
@click.option("--n", "n_replacements", type=int, default=20)
@click.option("--repeats", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def probe_independence_cmd(image_path, parts_path, oracle_parts, encoder_path, generator_path,
                           n_replacements, repeats, seed, out_path):
    """Part-independence statistics with sigma/variation heatmaps."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    E = load_encoder(encoder_path)
    G = load_generator(generator_path)
    x = ImageBatch(im.load_png(image_path)[None])
    parts = []
    if oracle_parts:
        for cid, m in oracle_part_masks(G).items():
            parts.append((cid, m))
    elif parts_path:
        doc = json.loads(Path(parts_path).read_text())
        base = Path(parts_path).parent
        for entry in doc["parts"]:
            parts.append((entry["id"], im.load_mask_png(base / entry["mask"])[None]))
    else:
        raise click.ClickException("pass --parts or --oracle-parts")
    reports = part_independence(
        E, G, x, parts, n_replacements=n_replacements, repeats=repeats, seed=seed
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for rep in reports:
        sigma_png = out_path.parent / f"sigma_{rep.component_id}.png"
        v_png = out_path.parent / f"variation_{rep.component_id}.png"
        plt.imsave(sigma_png, rep.sigma_map.mean(axis=0), cmap="viridis")
        plt.imsave(v_png, rep.variation_map.mean(axis=0), cmap="viridis")
        rows.append(
            {
                "component_id": rep.component_id,
                "score": rep.score,
                "n_replacements": rep.n_replacements,
                "n_repeats": rep.n_repeats,
                "sigma_map": sigma_png.name,
                "variation_map": v_png.name,
            }
        )
    with open(out_path, "w") as f:
        json.dump({"components": rows}, f, indent=2)
    click.echo(json.dumps({"components": rows}, indent=2))


@main.command("tradeoff-report")
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(path_type=Path), required=True)
def tradeoff_report_cmd(reports, out):
    """Masked-L1 vs. FID-delta scatter across eval reports."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    points = []
    extractor_ids = set()
    for path in reports:
        doc = json.loads(Path(path).read_text())
        extractor_ids.add(doc.get("extractor_id"))
        points.append(
            {
                "label": Path(path).stem,
                "masked_l1": doc["masked_l1"],
                "fid_delta": doc["fid_delta"],
            }
        )
    if len(extractor_ids) > 1:
        raise ExtractorMismatchError(f"reports use different extractors: {sorted(extractor_ids)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tradeoff.json", "w") as f:
        json.dump({"points": points}, f, indent=2)
    fig, ax = plt.subplots(figsize=(5, 4))
    for p in points:
        ax.scatter(p["masked_l1"], p["fid_delta"], label=p["label"])
    ax.set_xlabel("masked L1 (input collage vs composite)")
    ax.set_ylabel("FID delta (composites - reencoded)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "tradeoff.png", dpi=120)
    plt.close(fig)
    click.echo(f"tradeoff report written to {out}")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve_cmd(config_path, host, port):
    """Run the HTTP composition service."""
    import uvicorn

    from .service import create_app, load_service_config

    cfg = load_service_config(config_path)
    if host is not None:
        cfg.host = host
    if port is not None:
        cfg.port = port
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")


if __name__ == "__main__":
    main()
