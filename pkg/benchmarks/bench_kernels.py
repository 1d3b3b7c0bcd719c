"""Benchmark the jitted kernels against the pure-numpy fallback.

Run from the repo root:

    python benchmarks/bench_kernels.py [--repeats 50]

Times each hot kernel on benchmark-sized batches under both backends and
prints per-call medians plus the speedup. The first jitted call compiles;
a warmup round keeps that out of the numbers.
"""

import argparse
import time

import numpy as np

from shapecast.kernels import numpy_impl

try:
    from shapecast.kernels import numba_impl
except ImportError:
    numba_impl = None


def _median_time(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _workloads(rng):
    batch, tc, tp, nch, hidden = 256, 48, 24, 1, 8
    din, dout = tc * nch, tp * nch
    X = rng.normal(size=(batch, din))
    Y = rng.normal(size=(batch, dout))
    P = rng.normal(size=(batch, dout))
    w = rng.uniform(0.5, 1.5, size=tp)
    W = rng.normal(size=(din, dout)) * 0.1
    b = rng.normal(size=dout) * 0.1
    Wt = rng.normal(size=(din, nch)) * 0.1
    bt = rng.normal(size=nch) * 0.1
    W1 = rng.normal(size=(din, hidden)) * 0.1
    b1 = rng.normal(size=hidden) * 0.1
    W2 = rng.normal(size=(hidden, dout)) * 0.1
    b2 = rng.normal(size=dout) * 0.1
    return [
        ("dl_forward", (W, b, X)),
        ("tied_forward", (Wt, bt, X, tp)),
        ("mlp_forward", (W1, b1, W2, b2, X)),
        ("step_losses", (P, Y, tp, nch)),
        ("dl_loss_grad", (W, b, X, Y, w, tp, nch)),
        ("tied_loss_grad", (Wt, bt, X, Y, w, tp, nch)),
        ("mlp_loss_grad", (W1, b1, W2, b2, X, Y, w, tp, nch)),
    ]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    works = _workloads(rng)

    if numba_impl is None:
        print("numba unavailable; timing the numpy backend only")
    else:
        for name, wargs in works:   # compile outside the timed region
            getattr(numba_impl, name)(*wargs)

    print(f"{'kernel':<16} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, wargs in works:
        t_np = _median_time(getattr(numpy_impl, name), wargs, args.repeats)
        if numba_impl is None:
            print(f"{name:<16} {t_np * 1e6:>10.1f}us {'-':>12} {'-':>9}")
            continue
        t_nb = _median_time(getattr(numba_impl, name), wargs, args.repeats)
        print(f"{name:<16} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us "
              f"{t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
