"""Benchmark the numpy (im2col + BLAS) and numba (JIT loop) kernel
backends on the shapes the training loop actually runs, plus one full
encoder training step.

Usage: python benchmarks/bench_backends.py [--repeats N]

The default backend when LATENTCOLLAGE_BACKEND is unset follows the
winner of this benchmark on the reference box (numpy).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from latentcollage import backend
from latentcollage.generators import build_procedural_generator
from latentcollage.latent import LatentKind, LatentSpec
from latentcollage.training import TrainConfig, init_train_state, train_step

KERNEL_CASES = [
    # (label, fn-name, args builder)
    ("conv fwd 16x4x64x64 k4s2", "conv2d_fwd", lambda r: (r.normal(size=(16, 4, 64, 64)).astype(np.float32), r.normal(size=(16, 4, 4, 4)).astype(np.float32), 2, 1)),
    ("conv fwd 16x16x64x64 k3s1", "conv2d_fwd", lambda r: (r.normal(size=(16, 16, 64, 64)).astype(np.float32), r.normal(size=(16, 16, 3, 3)).astype(np.float32), 1, 1)),
    ("conv bwd_in 16x32x32x32 k4s2", "conv2d_bwd_input", lambda r: (r.normal(size=(16, 32, 32, 32)).astype(np.float32), r.normal(size=(32, 16, 4, 4)).astype(np.float32), 2, 1, 64, 64)),
    ("conv bwd_w 16x16x64x64 k4s2", "conv2d_bwd_weight", lambda r: (r.normal(size=(16, 16, 64, 64)).astype(np.float32), r.normal(size=(16, 32, 32, 32)).astype(np.float32), 2, 1, 4, 4)),
    ("bilinear 16x1x6x6 -> 64x64", "bilinear_resize", lambda r: (r.uniform(size=(16, 1, 6, 6)), 64, 64)),
]


def time_call(fn, args, repeats):
    fn(*args)  # warmup / JIT
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats * 1000.0


def bench_kernels(repeats: int) -> dict:
    results = {}
    for name in ("numpy", "numba"):
        backend.set_backend(name)
        K = backend.kernels()
        rng = np.random.default_rng(0)
        for label, fn_name, build in KERNEL_CASES:
            args = build(rng)
            results.setdefault(label, {})[name] = time_call(getattr(K, fn_name), args, repeats)
    return results


def bench_train_step(repeats: int) -> dict:
    spec = LatentSpec(LatentKind.SPHERICAL_Z, 12)
    G = build_procedural_generator(spec, (3, 64, 64), seed=7)
    out = {}
    for name in ("numpy", "numba"):
        backend.set_backend(name)
        cfg = TrainConfig(steps=repeats + 1, batch_size=16, seed=0)
        state = init_train_state(G, cfg)
        train_step(state, G, cfg)  # warmup / JIT
        t0 = time.perf_counter()
        for _ in range(repeats):
            train_step(state, G, cfg)
        out[name] = (time.perf_counter() - t0) / repeats * 1000.0
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"{'case':38s} {'numpy':>10s} {'numba':>10s} {'numba/numpy':>12s}")
    kernel_results = bench_kernels(args.repeats)
    for label, times in kernel_results.items():
        ratio = times["numba"] / times["numpy"]
        print(f"{label:38s} {times['numpy']:8.1f}ms {times['numba']:8.1f}ms {ratio:11.2f}x")
    step = bench_train_step(args.repeats)
    ratio = step["numba"] / step["numpy"]
    print(f"{'full train step (batch 16, 64x64)':38s} {step['numpy']:8.1f}ms {step['numba']:8.1f}ms {ratio:11.2f}x")


if __name__ == "__main__":
    main()
