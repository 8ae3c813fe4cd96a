"""Benchmark the numba kernels against the pure-numpy fallbacks.

The package selects its backend at import time from POSESTITCH_NUMBA; this
script bypasses the switch and times both implementations directly on the
same inputs, then checks they agree.

Run:  python benchmarks/bench_kernels.py [--n 20000]
"""

import argparse
import time

import numpy as np

from posestitch import _kernels


def bench(label, fn, args_list, repeats=3):
    fn(*args_list[0])  # warm up (JIT compile on the numba path)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    print(f"  {label:<22} {best * 1e3:9.1f} ms")
    return best


def bench_oks(n, rng):
    print(f"oks_pair x {n}")
    args = []
    for _ in range(n):
        xy_a = rng.uniform(0, 100, (15, 2))
        xy_b = xy_a + rng.normal(0, 6, (15, 2))
        vis = rng.random(15) < 0.9
        args.append((xy_a, vis, xy_b, vis, 40.0, np.full(15, 0.15)))
    t_np = bench("numpy", _kernels._oks_pair_numpy, args)
    if _kernels.HAS_NUMBA:
        jit = _kernels._oks_pair if _kernels.USE_NUMBA else None
        if jit is None:
            from numba import njit
            jit = njit(cache=True)(_kernels._oks_pair_py)
        t_jit = bench("numba", jit, args)
        check = [abs(jit(*a) - _kernels._oks_pair_numpy(*a)) for a in args[:200]]
        print(f"  speedup {t_np / t_jit:6.1f}x   max |diff| {max(check):.2e}")


def bench_cluster(n, rng):
    print(f"cluster_frame x {n}")
    args = []
    for _ in range(n):
        m = int(rng.integers(2, 12))
        pts = np.vstack([rng.normal(0, 1.5, (m // 2 + 1, 2)),
                         rng.normal(30, 1.5, (m - m // 2 - 1 + 1, 2))])
        args.append((pts, 8.0, np.empty(len(pts), np.int64)))
    t_np = bench("numpy", _kernels._cluster_frame_numpy, args)
    if _kernels.HAS_NUMBA:
        jit = _kernels._cluster_frame_inner if _kernels.USE_NUMBA else None
        if jit is None:
            from numba import njit
            jit = njit(cache=True)(_kernels._cluster_frame_py)
        t_jit = bench("numba", jit, args)
        agree = 0
        for pts, bw, _ in args[:200]:
            l1 = np.empty(len(pts), np.int64)
            l2 = np.empty(len(pts), np.int64)
            jit(pts, bw, l1)
            _kernels._cluster_frame_numpy(pts, bw, l2)
            agree += int(np.array_equal(l1, l2))
        print(f"  speedup {t_np / t_jit:6.1f}x   label agreement {agree}/200")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000,
                    help="number of kernel invocations per benchmark")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"backend in use: {'numba' if _kernels.USE_NUMBA else 'numpy'} "
          f"(POSESTITCH_NUMBA toggles)")
    bench_oks(args.n, rng)
    bench_cluster(max(args.n // 10, 100), rng)


if __name__ == "__main__":
    main()
