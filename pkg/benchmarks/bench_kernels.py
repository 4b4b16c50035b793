"""Throughput of the compiled and pure-Python special-function kernels.

Usage: python3 benchmarks/bench_kernels.py [n]
"""

import sys
import timeit

import numpy as np

from disp2d import _kernels_py

try:
    from disp2d import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

REPEAT = 3


def bench(module, z, name):
    out = {}
    for fn in ("j0y0", "r0", "e0"):
        f = getattr(module, fn)
        args = (z,) if fn == "j0y0" else (z, 1)
        best = min(timeit.repeat(lambda: f(*args), number=1, repeat=REPEAT))
        out[fn] = best
        print(f"{name:8s} {fn:5s} {z.size / best / 1e6:8.2f} Mevals/s")
    return out


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    z = np.random.default_rng(0).uniform(1e-3, 60.0, n)
    py = bench(_kernels_py, z, "python")
    if _kernels_c is None:
        print("compiled extension not built")
        return
    c = bench(_kernels_c, z, "compiled")
    for fn in py:
        print(f"speedup {fn:5s} {py[fn] / c[fn]:6.2f}x")


if __name__ == "__main__":
    main()
