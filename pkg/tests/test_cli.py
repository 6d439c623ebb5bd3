import json

import numpy as np
import pytest
from click.testing import CliRunner

from latentcollage import images as im
from latentcollage.cli import main
from latentcollage.composition import OracleBlockPartSource, PRESETS, random_collage, collage_spec_to_json
from latentcollage.generators import generate, oracle_part_masks
from latentcollage.latent import sample_latent

from conftest import oracle_spec


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, oracle32, enc_tiny):
    root = tmp_path_factory.mktemp("cli")
    oracle32.save(root / "gen")
    enc_tiny.save(root / "enc")
    return root


def run_cli(*args):
    runner = CliRunner()
    result = runner.invoke(main, [str(a) for a in args], catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def test_make_generator_procedural(tmp_path):
    out = tmp_path / "gen_run"
    run_cli("make-generator", "--kind", "procedural", "--size", "32", "--out", out)
    assert (out / "run.json").exists()
    assert (out / "checkpoints" / "generator" / "meta.json").exists()


def test_train_writes_artifacts(workdir, tmp_path):
    out = tmp_path / "train_run"
    run_cli(
        "train",
        "--generator", workdir / "gen",
        "--steps", 3,
        "--batch-size", 4,
        "--base-channels", 8,
        "--out", out,
    )
    assert (out / "run.json").exists()
    assert (out / "encoder" / "meta.json").exists()
    lines = (out / "loss_history.jsonl").read_text().splitlines()
    assert len(lines) == 3
    row = json.loads(lines[0])
    assert {"step", "total", "mse", "perceptual", "latent"} <= set(row)


def test_compose_command(workdir, tmp_path, oracle32):
    spec = random_collage(oracle32, OracleBlockPartSource(oracle32), PRESETS["oracle-scene"], seed=4)
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(collage_spec_to_json(spec)))
    out = tmp_path / "composite.png"
    run_cli(
        "compose",
        "--spec", spec_path,
        "--encoder", workdir / "enc",
        "--generator", workdir / "gen",
        "--out", out,
    )
    assert out.exists()
    assert im.load_png(out).shape == (3, 32, 32)


def test_make_collages_and_eval_pipeline(workdir, tmp_path):
    out = tmp_path / "collages"
    run_cli(
        "make-collages",
        "--generator", workdir / "gen",
        "--encoder", workdir / "enc",
        "--count", 8,
        "--seed", 5,
        "--out", out,
    )
    rows = [json.loads(l) for l in (out / "manifest.jsonl").read_text().splitlines()]
    assert len(rows) == 8
    for key in ("collage", "mask", "composite", "reencoded", "reference"):
        assert (out / rows[0][key]).exists()
    # determinism: same seed, same first item
    out2 = tmp_path / "collages2"
    run_cli(
        "make-collages",
        "--generator", workdir / "gen",
        "--encoder", workdir / "enc",
        "--count", 1,
        "--seed", 5,
        "--out", out2,
    )
    a = (out / "samples" / "collages" / "00000.png").read_bytes()
    b = (out2 / "samples" / "collages" / "00000.png").read_bytes()
    assert a == b

    report_path = tmp_path / "report.json"
    run_cli(
        "eval",
        "--real", out / "samples" / "reference",
        "--fake", out,
        "--k", 2,
        "--out", report_path,
    )
    report = json.loads(report_path.read_text())
    for key in ("masked_l1", "fid", "fid_delta", "density", "coverage", "collage_fid_delta"):
        assert report[key] is not None
        assert np.isfinite(report[key])
    assert report["n_samples"] == 8
    assert report["k_neighbors"] == 2

    # plain-directory mode: only distribution metrics
    report2_path = tmp_path / "report2.json"
    run_cli(
        "eval",
        "--real", out / "samples" / "reference",
        "--fake", out / "samples" / "composites",
        "--k", 2,
        "--out", report2_path,
    )
    report2 = json.loads(report2_path.read_text())
    assert report2["masked_l1"] is None and report2["fid_delta"] is None
    assert np.isfinite(report2["fid"])

    # tradeoff report: single point, coincident duplicate points, extractor guard
    tr_out = tmp_path / "tradeoff"
    run_cli("tradeoff-report", report_path, "--out", tr_out)
    doc = json.loads((tr_out / "tradeoff.json").read_text())
    assert len(doc["points"]) == 1
    assert (tr_out / "tradeoff.png").exists()

    twin = tmp_path / "report_twin.json"
    twin.write_text(report_path.read_text())
    tr2 = tmp_path / "tradeoff2"
    run_cli("tradeoff-report", report_path, twin, "--out", tr2)
    doc2 = json.loads((tr2 / "tradeoff.json").read_text())
    assert len(doc2["points"]) == 2
    assert doc2["points"][0]["masked_l1"] == doc2["points"][1]["masked_l1"]
    assert doc2["points"][0]["fid_delta"] == doc2["points"][1]["fid_delta"]

    other = json.loads(report_path.read_text())
    other["extractor_id"] = "someone-else/v9"
    mismatch = tmp_path / "report_other.json"
    mismatch.write_text(json.dumps(other))
    from latentcollage.errors import ExtractorMismatchError
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["tradeoff-report", str(report_path), str(mismatch), "--out", str(tmp_path / "bad")],
    )
    assert result.exit_code != 0
    assert isinstance(result.exception, ExtractorMismatchError)


def test_blend_compare_command(workdir, tmp_path, oracle32):
    x1 = generate(oracle32, sample_latent(oracle_spec(), 1, seed=6))
    x2 = generate(oracle32, sample_latent(oracle_spec(), 1, seed=7))
    im.save_png(tmp_path / "a.png", x1.single())
    im.save_png(tmp_path / "b.png", x2.single())
    m = oracle_part_masks(oracle32)["tree"]
    im.save_mask_png(tmp_path / "m.png", m[0])
    out = tmp_path / "blend"
    run_cli(
        "blend-compare",
        "--context", tmp_path / "a.png",
        "--target", tmp_path / "b.png",
        "--mask", tmp_path / "m.png",
        "--encoder", workdir / "enc",
        "--generator", workdir / "gen",
        "--out", out,
    )
    for name in ("composition.png", "latent_blend.png", "pixel_blend.png", "distances.json"):
        assert (out / name).exists()
    doc = json.loads((out / "distances.json").read_text())
    assert set(doc["distances"]) == {"composition", "latent_blend", "pixel_blend"}


def test_probe_independence_command(workdir, tmp_path, oracle32):
    x = generate(oracle32, sample_latent(oracle_spec(), 1, seed=8))
    im.save_png(tmp_path / "probe.png", x.single())
    report_path = tmp_path / "ind" / "report.json"
    run_cli(
        "probe-independence",
        "--image", tmp_path / "probe.png",
        "--oracle-parts",
        "--encoder", workdir / "enc",
        "--generator", workdir / "gen",
        "--n", 3,
        "--repeats", 1,
        "--out", report_path,
    )
    doc = json.loads(report_path.read_text())
    ids = {c["component_id"] for c in doc["components"]}
    assert {"background", "building", "tree"} <= ids
    for c in doc["components"]:
        assert (report_path.parent / c["sigma_map"]).exists()
        assert (report_path.parent / c["variation_map"]).exists()


def test_env_overrides_flag(workdir, tmp_path, monkeypatch):
    out = tmp_path / "env_run"
    monkeypatch.setenv("LATENTCOLLAGE_STEPS", "2")
    run_cli(
        "train",
        "--generator", workdir / "gen",
        "--steps", 5,
        "--batch-size", 4,
        "--base-channels", 8,
        "--out", out,
    )
    lines = (out / "loss_history.jsonl").read_text().splitlines()
    assert len(lines) == 2  # env wins over the explicit flag
    doc = json.loads((out / "run.json").read_text())
    assert doc["resolved"]["steps"] == 2
    assert doc["command"] == "train"
    assert "package_version" in doc
