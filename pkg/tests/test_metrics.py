import numpy as np
import pytest

from latentcollage.errors import (
    EmptyMaskError,
    ExtractorMismatchError,
    InsufficientSamplesError,
    ShapeMismatchError,
    UnknownExtractorError,
)
from latentcollage.features import BUILTIN_EXTRACTOR_ID
from latentcollage.generators import generate
from latentcollage.images import ImageBatch
from latentcollage.latent import sample_latent
from latentcollage.masking import Mask, ones_mask
from latentcollage.metrics import (
    FeatureSet,
    density_coverage,
    extract_features,
    fid_delta,
    frechet_distance,
    load_feature_set,
    masked_l1,
    save_feature_set,
)

from conftest import oracle_spec


def img(arr):
    return ImageBatch(np.asarray(arr, dtype=np.float32))


def test_masked_l1_fixtures():
    x = img(np.zeros((1, 1, 2, 2)))
    assert masked_l1(x, x, ones_mask(2, 2)) == 0.0
    ones_img = img(np.ones((1, 1, 2, 2)))
    assert masked_l1(ones_img, x, ones_mask(2, 2)) == pytest.approx(1.0)
    xf = img([[[[0, 1], [1, 0]]]])
    yf = img([[[[0, 0], [1, 1]]]])
    m = Mask(np.array([[[[1, 1], [1, 0]]]], dtype=np.float32))
    assert masked_l1(xf, yf, m) == pytest.approx(1.0 / 3.0)


def test_masked_l1_full_mask_equals_plain_mae(rng):
    x = img(rng.uniform(-1, 1, size=(2, 3, 8, 8)))
    y = img(rng.uniform(-1, 1, size=(2, 3, 8, 8)))
    full = ones_mask(8, 8, 2)
    assert masked_l1(x, y, full) == pytest.approx(float(np.abs(x.values - y.values).mean()), rel=1e-6)


def test_masked_l1_errors():
    x = img(np.zeros((1, 3, 4, 4)))
    with pytest.raises(EmptyMaskError):
        masked_l1(x, x, Mask(np.zeros((1, 1, 4, 4), dtype=np.float32)))
    with pytest.raises(ShapeMismatchError):
        masked_l1(x, img(np.zeros((1, 3, 8, 8))), ones_mask(4, 4))


def feats(arr, ex="test/ex"):
    return FeatureSet(np.asarray(arr, dtype=np.float64), ex)


def test_frechet_identity_symmetry_shuffle(rng):
    a = rng.normal(size=(500, 6))
    b = rng.normal(loc=0.3, size=(400, 6))
    fa, fb = feats(a), feats(b)
    assert frechet_distance(fa, fa) <= 1e-6
    d_ab = frechet_distance(fa, fb)
    d_ba = frechet_distance(fb, fa)
    assert abs(d_ab - d_ba) < 1e-8
    shuffled = feats(a[rng.permutation(500)])
    assert abs(frechet_distance(shuffled, fb) - d_ab) < 1e-8


def test_frechet_gaussian_shift_small():
    rng = np.random.default_rng(0)
    mu = np.zeros(8)
    mu[0] = 2.0  # ||mu||^2 = 4
    a = rng.standard_normal((20000, 8))
    b = rng.standard_normal((20000, 8)) + mu
    d = frechet_distance(feats(a), feats(b))
    assert d == pytest.approx(4.0, abs=0.2)


def test_frechet_insufficient_samples():
    with pytest.raises(InsufficientSamplesError):
        frechet_distance(feats(np.zeros((1, 4))), feats(np.zeros((5, 4))))


def brute_force_density_coverage(real, fake, k):
    n, m = len(real), len(fake)
    radii = []
    for i in range(n):
        dists = sorted(np.linalg.norm(real[i] - real[j]) for j in range(n) if j != i)
        radii.append(dists[k - 1])
    density_count = 0
    covered = 0
    for i in range(n):
        any_inside = False
        for j in range(m):
            if np.linalg.norm(fake[j] - real[i]) <= radii[i]:
                density_count += 1
                any_inside = True
        covered += int(any_inside)
    return density_count / (k * m), covered / n


def test_density_coverage_matches_bruteforce(rng):
    real = rng.normal(size=(30, 2))
    fake = rng.normal(size=(25, 2))
    got = density_coverage(feats(real), feats(fake), k=3)
    want = brute_force_density_coverage(real, fake, 3)
    assert got[0] == pytest.approx(want[0], abs=1e-12)
    assert got[1] == pytest.approx(want[1], abs=1e-12)


def test_density_coverage_identical_sets(rng):
    pts = rng.normal(size=(40, 3))
    density, coverage = density_coverage(feats(pts), feats(pts.copy()), k=5)
    assert coverage == 1.0
    assert density > 0


def test_density_coverage_far_fake(rng):
    real = rng.normal(size=(30, 2))
    fake = rng.normal(size=(30, 2)) + 1000.0
    density, coverage = density_coverage(feats(real), feats(fake), k=3)
    assert density == 0.0 and coverage == 0.0


def test_density_coverage_guards(rng):
    real = feats(rng.normal(size=(4, 2)))
    with pytest.raises(InsufficientSamplesError):
        density_coverage(real, real, k=5)
    other = feats(rng.normal(size=(30, 2)), ex="other/ex")
    with pytest.raises(ExtractorMismatchError):
        density_coverage(feats(rng.normal(size=(30, 2))), other, k=3)


def test_fid_delta_identities(rng):
    ref = feats(rng.normal(size=(300, 5)))
    comp = feats(rng.normal(loc=0.5, size=(300, 5)))
    assert fid_delta(comp, comp, ref) == 0.0
    d = fid_delta(comp, ref, ref)
    assert fid_delta(ref, comp, ref) == pytest.approx(-d, abs=1e-9)
    with pytest.raises(ExtractorMismatchError):
        fid_delta(comp, feats(rng.normal(size=(300, 5)), ex="other"), ref)


def test_fid_delta_analytic_gaussians():
    rng = np.random.default_rng(1)
    n, d = 40000, 8
    ref = rng.standard_normal((n, d))
    mu_a = np.zeros(d)
    mu_a[0] = 2.0  # FID 4 against ref
    mu_b = np.zeros(d)
    mu_b[1] = 1.0  # FID 1 against ref
    a = rng.standard_normal((n, d)) + mu_a
    b = rng.standard_normal((n, d)) + mu_b
    delta = fid_delta(feats(a), feats(b), feats(ref))
    assert delta == pytest.approx(3.0, abs=0.15)


def test_extractor_determinism_and_dim(oracle64):
    z = sample_latent(oracle_spec(), 8, seed=1)
    x = generate(oracle64, z)
    f1 = extract_features(x)
    f2 = extract_features(x)
    assert np.array_equal(f1.values, f2.values)
    assert f1.dim == 64
    assert f1.extractor_id == BUILTIN_EXTRACTOR_ID


def test_extractor_separates_scenes(oracle64):
    z = sample_latent(oracle_spec(), 50, seed=2)
    f = extract_features(generate(oracle64, z)).values
    dists = np.linalg.norm(f[:, None] - f[None, :], axis=-1)
    np.fill_diagonal(dists, np.inf)
    assert dists.min() > 0


def test_unknown_extractor():
    x = ImageBatch(np.zeros((1, 3, 32, 32), dtype=np.float32))
    with pytest.raises(UnknownExtractorError):
        extract_features(x, "does-not-exist")


def test_feature_set_roundtrip(tmp_path, rng):
    fs = FeatureSet(rng.normal(size=(10, 4)).astype(np.float32), "test/ex")
    save_feature_set(tmp_path / "f", fs)
    back = load_feature_set(tmp_path / "f")
    assert back.extractor_id == fs.extractor_id
    assert np.array_equal(back.values, fs.values)


def test_parallel_shard_consistency(oracle64):
    # feature extraction over shards must agree with the single pass
    z = sample_latent(oracle_spec(), 12, seed=3)
    x = generate(oracle64, z)
    whole = extract_features(x).values
    parts = np.concatenate(
        [extract_features(ImageBatch(x.values[i : i + 4])).values for i in range(0, 12, 4)]
    )
    assert np.allclose(whole, parts, atol=1e-6)
