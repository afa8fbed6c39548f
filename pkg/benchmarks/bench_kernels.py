"""Benchmark the jitted kernels against their plain-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Times each kernel on a realistic workload with the numba path (when
available) and with the pure implementations from ``PY_IMPLS``, and checks
that both paths agree on the outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mapseg import _kernels


def _perception_workload(rng):
    s = np.sort(rng.uniform(0.0, 1000.0, 5000))
    n_spans = 200
    lo = rng.uniform(0.0, 950.0, n_spans)
    hi = lo + rng.uniform(5.0, 50.0, n_spans)
    cls = rng.integers(0, 40, n_spans)
    scores = rng.uniform(0.0, 1.0, 40)
    return (s, lo, hi, cls.astype(np.int64), scores)


def _nms_workload(rng):
    return (rng.uniform(0.0, 1000.0, 5000), 10.0)


def _rect_workload(rng):
    x0 = rng.uniform(0.0, 1100.0, 400)
    y0 = rng.uniform(0.0, 1500.0, 400)
    w = rng.uniform(10.0, 150.0, 400)
    h = rng.uniform(10.0, 150.0, 400)
    return (np.column_stack((x0, y0, x0 + w, y0 + h)),)


WORKLOADS = {
    "perception_increments": _perception_workload,
    "nms_keep": _nms_workload,
    "rect_union_area": _rect_workload,
}


def _time(fn, args, repeats):
    fn(*args)  # warm-up (and jit compilation on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(5)
    mode = "numba jit" if _kernels.USE_JIT else "pure python/numpy (jit disabled)"
    print(f"fast path: {mode}")
    print(f"{'kernel':<24} {'fast (ms)':>10} {'pure (ms)':>10} {'speedup':>8}")
    for name, make in WORKLOADS.items():
        work = make(rng)
        fast = getattr(_kernels, name)
        pure = _kernels.PY_IMPLS[name]
        np.testing.assert_allclose(
            np.asarray(fast(*work), dtype=float),
            np.asarray(pure(*work), dtype=float),
        )
        t_fast = _time(fast, work, args.repeats)
        t_pure = _time(pure, work, args.repeats)
        print(
            f"{name:<24} {t_fast * 1e3:>10.3f} {t_pure * 1e3:>10.3f}"
            f" {t_pure / t_fast:>7.1f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
