"""Time the compiled landscape kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--extent 40]
"""
import argparse
import timeit

import numpy as np

from maxcode import _kernels_py
from maxcode.environment.simulator import Landscape

try:
    from maxcode import _kernels as _compiled
except ImportError:
    _compiled = None


def cases(landscape, extent, rng):
    m = landscape.model
    pts = rng.integers(0, extent, size=(20_000, landscape.dim))
    lo = np.zeros(landscape.dim, dtype=np.int64)
    hi = np.full(landscape.dim, extent - 1, dtype=np.int64)
    centre = np.full(landscape.dim, extent // 2, dtype=np.int64)
    return {
        "evaluate_points (20k)": lambda k: k.evaluate_points(pts, m),
        f"grid_best ({extent}^{landscape.dim})": lambda k: k.grid_best(lo, hi, m),
        "ball_best (r=8)": lambda k: k.ball_best(centre, 8, m),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--extent", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _compiled is None:
        print("compiled extension not built; only the Python backend is available")
    landscape = Landscape(seed=args.seed, dim=3, extent=args.extent)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<24} {'python (s)':>11} {'cython (s)':>11} {'ratio':>8}")
    for name, fn in cases(landscape, args.extent, rng).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        if _compiled is None:
            print(f"{name:<24} {t_py:>11.4f} {'-':>11} {'-':>8}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_compiled), number=1, repeat=args.repeat))
        print(f"{name:<24} {t_py:>11.4f} {t_c:>11.4f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
