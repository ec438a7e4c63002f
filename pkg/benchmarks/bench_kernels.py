"""Throughput comparison of the numba kernels against the numpy fallbacks.

Run:  python benchmarks/bench_kernels.py [--sizes small|large]

Both backend variants of each kernel stay importable regardless of which
one the package selected at import time, so this script times them side
by side in one process. To benchmark a full workload (estimators, fiber
tracing) on the fallback path instead, set HOPFLAB_NO_NUMBA=1 and rerun
whatever you were measuring.
"""

import argparse
import time

import numpy as np

from hopflab import _kernels as K


def _time(fn, *args, repeats=5):
    fn(*args)  # warm up (includes JIT compilation for the numba variants)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _polyline(seed, n):
    gen = np.random.default_rng(seed)
    t = np.linspace(0.0, 2.0 * np.pi, n + 1)
    a, b, c = gen.normal(size=(3, 3))
    pts = (np.outer(np.cos(t), a) + np.outer(np.sin(t), b)
           + np.outer(np.cos(3 * t), c) * 0.2)
    return 0.5 * (pts[1:] + pts[:-1]), pts[1:] - pts[:-1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", choices=("small", "large"), default="large")
    args = ap.parse_args()
    n_curve = 2_000 if args.sizes == "small" else 6_000
    n_pts = 20_000 if args.sizes == "small" else 100_000

    if not K.HAVE_NUMBA:
        print("numba unavailable (or HOPFLAB_NO_NUMBA set); "
              "timing the numpy path only")

    rows = []

    m1, s1 = _polyline(0, n_curve)
    m2, s2 = _polyline(1, n_curve)
    rows.append(("gauss_linking_sum", f"{n_curve}x{n_curve} segments",
                 _time(K.gauss_linking_sum_numpy, m1, s1, m2, s2),
                 _time(K.gauss_linking_sum_numba, m1, s1, m2, s2)
                 if K.HAVE_NUMBA else None))

    gen = np.random.default_rng(2)
    pts4 = gen.normal(size=(n_pts, 4))
    pts4 /= np.linalg.norm(pts4, axis=1, keepdims=True)
    rows.append(("oriented_frames", f"{n_pts} points on S^3",
                 _time(K.oriented_frames_numpy, pts4),
                 _time(K.oriented_frames_numba, pts4)
                 if K.HAVE_NUMBA else None))

    a = gen.normal(size=(n_pts // 10, 3))
    b = gen.normal(size=(n_pts // 10, 3))
    rows.append(("min_pairwise_distance", f"{n_pts // 10}x{n_pts // 10} pairs",
                 _time(K.min_pairwise_distance_numpy, a, b),
                 _time(K.min_pairwise_distance_numba, a, b)
                 if K.HAVE_NUMBA else None))

    print(f"{'kernel':24s} {'workload':22s} {'numpy':>10s} "
          f"{'numba':>10s} {'speedup':>8s}")
    for name, load, t_np, t_nb in rows:
        if t_nb is None:
            print(f"{name:24s} {load:22s} {t_np:9.4f}s {'-':>10s} {'-':>8s}")
        else:
            print(f"{name:24s} {load:22s} {t_np:9.4f}s {t_nb:9.4f}s "
                  f"{t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
