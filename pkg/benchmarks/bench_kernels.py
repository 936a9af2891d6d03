"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from gwv.kernels import backends


def _cases(rng):
    x = rng.uniform(-1, 1, size=(4000, 2))
    th = 2 * np.pi * np.arange(2048) / 2048
    circle = np.column_stack([np.cos(th), np.sin(th)])
    segs = np.hstack([circle, np.roll(circle, -1, axis=0)])
    centers = rng.uniform(-1, 1, size=(400, 2))
    return {
        "pairwise_sum": (rng.standard_normal(1_000_000),),
        "winding_numbers": (x, circle),
        "min_distance": (x, segs),
        "crossing_count": (segs[:512], segs[:512], 0.03),
        "bump_rows": (x, centers, np.full(400, 0.2)),
        "bspline_scatter": (x, rng.uniform(size=4000), (-1.0, -1.0), 1.0 / 16, 33, 33),
    }


def best_of(fn, args, repeat):
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        t.append(time.perf_counter() - t0)
    return min(t)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    cases = _cases(np.random.default_rng(0))
    impls = backends()
    names = sorted(impls)
    print(f"{'kernel':<18}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for kernel, a in cases.items():
        times = {n: best_of(getattr(impls[n], kernel), a, args.repeat) for n in names}
        line = f"{kernel:<18}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if "cython" in times:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
