"""Timing comparison of the two kernel backends.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Shapes mirror the production detectors: 50-length spectra and 32x32
correlation images at 64 filters. The first numba call per kernel is
excluded (compilation); timings are best-of-repeats wall time.
"""

import time

import numpy as np

from phasescout import kernels


def best_of(fn, args, repeats=7, inner=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def cases():
    rng = np.random.default_rng(0)
    x1 = rng.standard_normal((64, 50))
    w1 = rng.standard_normal((64, 64, 3))
    b1 = rng.standard_normal(64)
    g1 = rng.standard_normal((64, 50))
    x2 = rng.standard_normal((64, 32, 32))
    w2 = rng.standard_normal((64, 64, 3, 3))
    g2 = rng.standard_normal((64, 32, 32))
    yield "conv1d_forward", (x1, w1, b1)
    yield "conv1d_backward", (x1, w1, g1)
    yield "conv2d_forward", (x2, w2, b1)
    yield "conv2d_backward", (x2, w2, g2)
    yield "maxpool1d_forward", (x1, 2)
    yield "maxpool2d_forward", (x2, 2)
    yield "upsample1d_forward", (x1,)
    yield "upsample2d_forward", (x2,)


def main():
    backends = ["numpy"]
    if kernels.HAVE_NUMBA:
        backends.append("numba")
    else:
        print("numba is not installed; timing the numpy backend only")
    tables = {name: kernels.backend_functions(name) for name in backends}

    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'ratio':>9}")
    for name, args in cases():
        row = []
        for backend in backends:
            fn = tables[backend][name]
            fn(*args)  # warm up / compile
            row.append(best_of(fn, args))
        line = f"{name:<22}" + "".join(f"{t * 1e6:>10.0f}us" for t in row)
        if len(row) == 2:
            line += f"{row[0] / row[1]:>8.2f}x"
        print(line)


if __name__ == "__main__":
    main()
