"""Both kernel backends against a scalar brute-force reference."""

import numpy as np
import pytest

from latentcollage import _kernels_numpy as knp
from latentcollage import _kernels_numba as knb

BACKENDS = [("numpy", knp), ("numba", knb)]


def conv_ref(x, w, stride, pad):
    n, ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    y = np.zeros((n, co, oh, ow), x.dtype)
    for b in range(n):
        for o in range(co):
            for oy in range(oh):
                for ox in range(ow):
                    patch = xp[b, :, oy * stride : oy * stride + kh, ox * stride : ox * stride + kw]
                    y[b, o, oy, ox] = (patch * w[o]).sum()
    return y


CASES = [(1, 1, 3, 8, 8), (2, 1, 4, 8, 8), (1, 0, 1, 5, 7), (2, 0, 2, 9, 7), (3, 2, 5, 12, 10)]


@pytest.mark.parametrize("name,K", BACKENDS)
@pytest.mark.parametrize("stride,pad,k,h,w", CASES)
def test_forward_matches_bruteforce(name, K, stride, pad, k, h, w):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, h, w))
    wt = rng.normal(size=(4, 3, k, k))
    got = K.conv2d_fwd(x, wt, stride, pad)
    assert np.allclose(got, conv_ref(x, wt, stride, pad), atol=1e-10)


@pytest.mark.parametrize("name,K", BACKENDS)
@pytest.mark.parametrize("stride,pad,k,h,w", CASES)
def test_backward_input_is_adjoint(name, K, stride, pad, k, h, w):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 3, h, w))
    wt = rng.normal(size=(4, 3, k, k))
    y = K.conv2d_fwd(x, wt, stride, pad)
    g = rng.normal(size=y.shape)
    dx = K.conv2d_bwd_input(g, wt, stride, pad, h, w)
    assert dx.shape == x.shape
    # <conv(x), g> == <x, conv_adjoint(g)> characterizes the gradient exactly
    assert abs((y * g).sum() - (x * dx).sum()) < 1e-8


@pytest.mark.parametrize("name,K", BACKENDS)
@pytest.mark.parametrize("stride,pad,k,h,w", CASES)
def test_backward_weight_matches_directional_derivative(name, K, stride, pad, k, h, w):
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 3, h, w))
    wt = rng.normal(size=(4, 3, k, k))
    g = rng.normal(size=K.conv2d_fwd(x, wt, stride, pad).shape)
    dw = K.conv2d_bwd_weight(x, g, stride, pad, k, k)
    direction = rng.normal(size=wt.shape)
    eps = 1e-6
    fp = (K.conv2d_fwd(x, wt + eps * direction, stride, pad) * g).sum()
    fm = (K.conv2d_fwd(x, wt - eps * direction, stride, pad) * g).sum()
    assert abs((fp - fm) / (2 * eps) - (dw * direction).sum()) < 1e-5


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_backends_agree(dtype):
    rng = np.random.default_rng(3)
    for stride, pad, k, h, w in CASES:
        x = rng.normal(size=(2, 3, h, w)).astype(dtype)
        wt = rng.normal(size=(4, 3, k, k)).astype(dtype)
        a = knp.conv2d_fwd(x, wt, stride, pad)
        b = knb.conv2d_fwd(x, wt, stride, pad)
        assert np.allclose(a, b, rtol=1e-4, atol=1e-5)
        g = rng.normal(size=a.shape).astype(dtype)
        assert np.allclose(
            knp.conv2d_bwd_input(g, wt, stride, pad, h, w),
            knb.conv2d_bwd_input(g, wt, stride, pad, h, w),
            rtol=1e-4,
            atol=1e-5,
        )
        assert np.allclose(
            knp.conv2d_bwd_weight(x, g, stride, pad, k, k),
            knb.conv2d_bwd_weight(x, g, stride, pad, k, k),
            rtol=1e-3,
            atol=1e-4,
        )


@pytest.mark.parametrize("name,K", BACKENDS)
def test_bilinear_resize_hand_case(name, K):
    patch = np.array([[0.2, 0.4], [0.6, 0.8]]).reshape(1, 1, 2, 2)
    up = K.bilinear_resize(patch, 4, 4)
    # align-corners: u(ty, tx) = 0.2 + 0.2*tx + 0.4*ty on a 0..1 grid
    t = np.array([0.0, 1 / 3, 2 / 3, 1.0])
    expected = 0.2 + 0.2 * t[None, :] + 0.4 * t[:, None]
    assert np.allclose(up[0, 0], expected, atol=1e-12)


@pytest.mark.parametrize("name,K", BACKENDS)
def test_bilinear_resize_identity_and_corners(name, K):
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(2, 1, 5, 7))
    assert np.allclose(K.bilinear_resize(x, 5, 7), x, atol=1e-12)
    up = K.bilinear_resize(x, 11, 13)
    assert np.allclose(up[:, :, 0, 0], x[:, :, 0, 0])
    assert np.allclose(up[:, :, -1, -1], x[:, :, -1, -1])
