"""Time the numba and numpy Weiszfeld kernels on round-sized inputs.

    python3 benchmarks/bench_weiszfeld.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from rotaf import _kernels

SHAPES = [(7, 4), (20, 20), (20, 7850), (60, 7850)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'shape':>12} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max |dz|':>10}")
    for k, p in SHAPES:
        V = rng.standard_normal((k, p))
        z0 = V.mean(axis=0)
        a = _kernels.weiszfeld_numpy(V, z0, 1e-4, 1e-6, 100)
        b = _kernels.weiszfeld_numba(V, z0, 1e-4, 1e-6, 100)  # also compiles
        t_np = min(timeit.repeat(lambda: _kernels.weiszfeld_numpy(V, z0, 1e-4, 1e-6, 100),
                                 number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: _kernels.weiszfeld_numba(V, z0, 1e-4, 1e-6, 100),
                                 number=1, repeat=args.repeat))
        dz = float(np.abs(a[0] - b[0]).max())
        print(f"{k:>5}x{p:<6} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:8.2f} {dz:10.2e}")


if __name__ == "__main__":
    main()
