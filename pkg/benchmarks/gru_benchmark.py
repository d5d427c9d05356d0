"""Timing comparison of the pure-NumPy and compiled GRU sequence kernels.

Runs forward + backward over a few sequence lengths and hidden sizes and
prints per-call times with the speedup of the compiled path.  Usage:

    python3 benchmarks/gru_benchmark.py [--repeats N]
"""

import argparse
import time

import numpy as np

from zpreader.tensorcore import _gru_py

try:
    from zpreader.tensorcore import _gru_cy
except ImportError:
    _gru_cy = None

SHAPES = ((40, 64), (40, 256), (200, 256), (400, 256))


def time_kernels(mod, xz, xr, xh, uz, ur, uc, dh, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        hs, zs, rs, cs = mod.gru_forward(xz, xr, xh, uz, ur, uc)
        mod.gru_backward(dh, hs, zs, rs, cs, uz, ur, uc)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'T':>5} {'H':>5} {'pure (ms)':>12} {'cython (ms)':>12} {'speedup':>9}")
    for T, H in SHAPES:
        xz, xr, xh = (rng.normal(size=(T, H)) for _ in range(3))
        uz, ur, uc = (rng.normal(size=(H, H)) * 0.3 for _ in range(3))
        dh = rng.normal(size=(T, H))
        t_py = time_kernels(_gru_py, xz, xr, xh, uz, ur, uc, dh, args.repeats)
        if _gru_cy is None:
            print(f"{T:>5} {H:>5} {t_py * 1e3:>12.3f} {'n/a':>12} {'n/a':>9}")
            continue
        t_cy = time_kernels(_gru_cy, xz, xr, xh, uz, ur, uc, dh, args.repeats)
        print(f"{T:>5} {H:>5} {t_py * 1e3:>12.3f} {t_cy * 1e3:>12.3f} "
              f"{t_py / t_cy:>8.1f}x")
    if _gru_cy is None:
        print("\ncompiled kernels not built; showing pure-NumPy timings only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
