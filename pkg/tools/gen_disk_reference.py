#!/usr/bin/env python3
"""Cross-check the closed form for the disk-averaged Green's function.

The self-interaction refinement test leans on the exact outgoing solution of

    (lap + k^2) u = -chi_{|y-c|<=R},   u(x) = int_{|y-c|<=R} G0(|x-y|) dy

with G0(r) = (i/4) H0^(2)(k r).  Matching J0/H0^(2) solutions at r = R and
using the Wronskian J0(z)Y1(z) - J1(z)Y0(z) = -2/(pi z) gives

    u(x) = 1/k^2 + (i pi R / 2k) H1^(2)(kR) J0(k r),   r <  R
    u(x) =         (i pi R / 2k) J1(kR) H0^(2)(k r),   r >= R

with r = |x - c|.  This script verifies the formula against direct adaptive
quadrature so the tests may rely on it; run it when touching that code path.
"""

import numpy as np
from scipy import integrate, special


def g0(k, r):
    return 0.25j * (special.j0(k * r) - 1j * special.y0(k * r))


def disk_quad(k, R, rx):
    def fre(th, rho):
        d = np.hypot(rx - rho * np.cos(th), rho * np.sin(th))
        return (g0(k, d) * rho).real

    def fim(th, rho):
        d = np.hypot(rx - rho * np.cos(th), rho * np.sin(th))
        return (g0(k, d) * rho).imag

    re, _ = integrate.dblquad(fre, 0, R, 0, 2 * np.pi, epsabs=1e-12, epsrel=1e-12)
    im, _ = integrate.dblquad(fim, 0, R, 0, 2 * np.pi, epsabs=1e-12, epsrel=1e-12)
    return re + 1j * im


def disk_closed(k, R, rx):
    if rx < R:
        h1 = special.j1(k * R) - 1j * special.y1(k * R)
        return 1 / k**2 + 1j * np.pi * R / (2 * k) * h1 * special.j0(k * rx)
    h0 = special.j0(k * rx) - 1j * special.y0(k * rx)
    return 1j * np.pi * R / (2 * k) * special.j1(k * R) * h0


if __name__ == "__main__":
    cases = [
        (2.0, 0.3, 0.0), (2.0, 0.3, 0.15), (2.0, 0.3, 0.9),
        (31.4, 0.02, 0.0), (31.4, 0.02, 0.5), (1.0, 1.0, 2.5),
    ]
    worst = 0.0
    for k, R, rx in cases:
        q = disk_quad(k, R, rx)
        c = disk_closed(k, R, rx)
        worst = max(worst, abs(q - c))
        print(f"k={k:<5g} R={R:<5g} r={rx:<5g} quad={q:.12g} closed={c:.12g} |diff|={abs(q - c):.2e}")
    assert worst < 1e-13, worst
    print("closed form confirmed")
