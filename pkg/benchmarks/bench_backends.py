#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel (block DCT, entropy coder, separable Gaussian
filter) on realistic workloads under both implementations and prints a
speedup table. The numba path includes a warmup call so JIT compilation
is excluded from the timings.

Usage: python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import time

import numpy as np

from roi_adapt import kernels


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    impls = kernels.implementations()
    if "numba" not in impls:
        print("numba unavailable; nothing to compare")
        return

    rng = np.random.default_rng(0)
    blocks = rng.uniform(-128, 127, size=(1280, 8, 8))  # one 320x256 frame
    img = rng.uniform(0, 255, size=(512, 640))
    taps = np.exp(-0.5 * ((np.arange(11) - 5) / 1.5) ** 2)
    taps /= taps.sum()
    levels = rng.integers(-40, 40, size=(1280, 64)).astype(np.int32)
    levels[rng.uniform(size=levels.shape) < 0.7] = 0
    buf = np.empty(levels.shape[0] * kernels._MAX_BLOCK_BYTES, dtype=np.uint8)
    n_used = impls["numpy"]["rle_encode"](levels, buf)
    coded = np.array(buf[:n_used])
    out = np.zeros_like(levels)

    cases = {
        "dct2_blocks (1280 blocks)":
            lambda impl: impl["dct2_blocks"](blocks),
        "filter2_valid (640x512, 11 taps)":
            lambda impl: impl["filter2_valid"](img, taps),
        "rle_encode (1280 blocks)":
            lambda impl: impl["rle_encode"](levels, buf),
        "rle_decode (1280 blocks)":
            lambda impl: impl["rle_decode"](coded, out),
    }

    print(f"{'kernel':38} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, call in cases.items():
        call(impls["numba"])  # JIT warmup
        t_np = _time(lambda: call(impls["numpy"]), args.repeat)
        t_nb = _time(lambda: call(impls["numba"]), args.repeat)
        print(f"{name:38} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms "
              f"{t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
