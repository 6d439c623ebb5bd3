import numpy as np
import pytest

from latentcollage import images as im
from latentcollage.errors import ShapeMismatchError
from latentcollage.images import ImageBatch


def test_range_validation_and_clipping():
    with pytest.raises(ValueError):
        ImageBatch(np.full((1, 3, 2, 2), 1.5))
    # tiny overshoot from float arithmetic is clipped, not rejected
    b = ImageBatch(np.full((1, 3, 2, 2), 1.0 + 1e-6))
    assert b.values.max() == 1.0


def test_shape_validation():
    with pytest.raises(ShapeMismatchError):
        ImageBatch(np.zeros((3, 4, 4)))


def test_uint8_roundtrip_is_stable():
    rng = np.random.default_rng(0)
    chw = rng.uniform(-1, 1, size=(3, 8, 8)).astype(np.float32)
    once = im.from_uint8(im.to_uint8(chw))
    twice = im.from_uint8(im.to_uint8(once))
    assert np.array_equal(once, twice)
    assert np.abs(once - chw).max() <= 1.0 / 255.0 + 1e-6


def test_png_bytes_roundtrip():
    rng = np.random.default_rng(1)
    chw = rng.uniform(-1, 1, size=(3, 16, 16)).astype(np.float32)
    data = im.png_bytes(chw)
    back = im.from_png_bytes(data)
    assert np.abs(back - chw).max() <= 1.0 / 255.0 + 1e-6
    assert im.png_bytes(back) == im.png_bytes(back)


def test_b64_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    chw = rng.uniform(-1, 1, size=(3, 8, 8)).astype(np.float32)
    b64 = im.b64_png(chw)
    back = im.from_b64_png(b64)
    assert np.abs(back - chw).max() <= 1.0 / 255.0 + 1e-6
    path = tmp_path / "x.png"
    im.save_png(path, chw)
    assert np.array_equal(im.load_png(path), back)


def test_single_requires_batch_of_one():
    batch = ImageBatch(np.zeros((2, 3, 4, 4), dtype=np.float32))
    with pytest.raises(ShapeMismatchError):
        batch.single()
