#!/usr/bin/env python3
"""Timings for the hot numeric kernels: compiled extension vs pure numpy.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--sizes 1e4,1e5,1e6] [--repeats 5]

The Bessel pair J0/Y0 dominates kernel-table construction and the fused
sin/cos dominates feature encoding, so those two are what the extension
module accelerates.  The pure path is always available (and is what
GIHELM_FORCE_PURE=1 selects); this script reports the actual speedup on
the current machine.
"""

import argparse
import time

import numpy as np

from gihelm.special import (
    BACKEND,
    _fused_sincos_pure,
    _j0_y0_pure,
    bessel_j0_y0,
    fused_sincos,
)


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run(sizes, repeats):
    print(f"active backend: {BACKEND}")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<14}{'n':>10}{'pure':>12}{'active':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        x = rng.uniform(1e-3, 40.0, size=n)
        t_pure = best_of(lambda: _j0_y0_pure(x), repeats)
        t_active = best_of(lambda: bessel_j0_y0(x), repeats)
        print(f"{'j0/y0':<14}{n:>10}{t_pure:>12.4e}{t_active:>12.4e}"
              f"{t_pure / t_active:>10.2f}")

        y = rng.uniform(-50.0, 50.0, size=n)
        t_pure = best_of(lambda: _fused_sincos_pure(y), repeats)
        t_active = best_of(lambda: fused_sincos(y), repeats)
        print(f"{'sin/cos':<14}{n:>10}{t_pure:>12.4e}{t_active:>12.4e}"
              f"{t_pure / t_active:>10.2f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1e4,1e5,1e6",
                        help="comma-separated array sizes")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(float(s)) for s in args.sizes.split(",")]
    run(sizes, args.repeats)


if __name__ == "__main__":
    main()
