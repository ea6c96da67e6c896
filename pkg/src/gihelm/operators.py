"""Discrete scattering integral: FFT fast path, dense oracle, linear system.

The scattered field obeys Us(x) = sum_k G0(x, y_k) D(y_k) with the
scattering source D = w^2 dm (U0 + Us) W on the grid.  Writing M for the
diagonal map u -> w^2 dm W u and C for convolution with the kernel table,
that is Us_hat = C M (u0 + us) = A us + b with A = C M and b = C M u0.
The FFT path evaluates C by padded circular convolution; the dense path
evaluates the same sum entry by entry from recomputed distances and is
kept deliberately independent of the FFT machinery.
"""

import numpy as np

from .errors import ResourceLimitError
from .grid import ComplexField
from .kernel import equivalent_disk_radius, green0, self_term

DENSE_CAP = 16384

_DENSE_BLOCK_ROWS = 1024


def _require_same_grid(kernel, medium, *fields):
    if kernel.physical_grid != medium.grid:
        raise ValueError("kernel was built for a different grid than the medium")
    for f in fields:
        if f.grid != medium.grid:
            raise ValueError("field grid does not match the medium grid")


def scatter_source(medium, u0, us):
    """D = w^2 dm (U0 + Us) W; zero wherever dm = 0."""
    if u0.grid != medium.grid or us.grid != medium.grid:
        raise ValueError("field grid does not match the medium grid")
    d = (medium.omega**2 * medium.grid.w) * medium.delta_m * (u0.values + us.values)
    return ComplexField(medium.grid, d)


def convolve(kernel, density_values):
    """Circular convolution of the kernel table with a padded density.

    density_values is (nz, nx) on the physical grid; the result is the
    linear convolution restricted back to the physical grid (exact
    because the table is padded to at least twice the extent).
    """
    nz, nx = kernel.physical_grid.shape
    spec = np.fft.fft2(density_values, s=kernel.padded_shape)
    return np.fft.ifft2(kernel.spectrum * spec)[:nz, :nx]


def convolve_adjoint(kernel, values):
    """Adjoint of convolve under the unweighted complex dot product."""
    nz, nx = kernel.physical_grid.shape
    spec = np.fft.fft2(values, s=kernel.padded_shape)
    return np.fft.ifft2(np.conj(kernel.spectrum) * spec)[:nz, :nx]


def gi_reconstruct_fft(kernel, medium, u0, us):
    """Us_hat = C(D) by FFT on the padded grid, restricted to the physical grid."""
    _require_same_grid(kernel, medium, u0, us)
    d = scatter_source(medium, u0, us)
    return ComplexField(medium.grid, convolve(kernel, d.values))


def gi_reconstruct_dense(medium, kernel, u0, us, cap=DENSE_CAP):
    """Us_hat by direct summation over scatterer points (oracle path).

    Recomputes G0 from pairwise node distances instead of reading the
    kernel table, so it shares no convolution machinery with the FFT
    path; the self interaction uses the kernel's self-term mode.  Work
    is O(N^2), blocked over rows; grids beyond cap are refused.
    """
    _require_same_grid(kernel, medium, u0, us)
    g = medium.grid
    if g.n > cap:
        raise ResourceLimitError(
            f"dense path refused: {g.n} points exceeds cap {cap}")
    d = scatter_source(medium, u0, us).values.ravel()
    coords = g.node_coords()
    diag = self_term(equivalent_disk_radius(g), kernel.k0, kernel.self_term_mode)

    out = np.empty(g.n, dtype=np.complex128)
    for start in range(0, g.n, _DENSE_BLOCK_ROWS):
        stop = min(start + _DENSE_BLOCK_ROWS, g.n)
        block = coords[start:stop]
        r = np.hypot(block[:, 0, None] - coords[None, :, 0],
                     block[:, 1, None] - coords[None, :, 1])
        hit = r == 0.0
        r[hit] = 1.0  # placeholder under the self-term entries
        gmat = green0(r, kernel.k0)
        gmat[hit] = diag
        out[start:stop] = gmat @ d
    return ComplexField(g, out.reshape(g.shape))


def gi_mismatch(kernel, medium, u0, us):
    """Mean squared GI violation (1/N_y) sum |Us_hat - Us|^2.

    Observed on the medium's interior only: with a tapered medium the pad
    contributes as scatterer but not as observation point.
    """
    rec = gi_reconstruct_fft(kernel, medium, u0, us)
    diff = (rec.values - us.values)[medium.interior]
    return float(np.mean(diff.real**2 + diff.imag**2))


class LinearSystemView:
    """(I - A) us = b with A = C M and b = C M u0.

    apply_A and apply_AH accept and return either ComplexField or a bare
    (nz, nx) complex array; the array form carries no finiteness checks,
    which the iterative solvers need in order to observe divergence
    rather than trip a constructor guard.
    """

    def __init__(self, kernel, medium, u0):
        _require_same_grid(kernel, medium, u0)
        self.kernel = kernel
        self.medium = medium
        self.grid = medium.grid
        self.m_values = medium.omega**2 * medium.grid.w * medium.delta_m
        self.b = ComplexField(self.grid, convolve(kernel, self.m_values * u0.values))

    def _wrap(self, values, like):
        return ComplexField(self.grid, values) if isinstance(like, ComplexField) else values

    def apply_A(self, u):
        values = u.values if isinstance(u, ComplexField) else u
        return self._wrap(convolve(self.kernel, self.m_values * values), u)

    def apply_AH(self, y):
        values = y.values if isinstance(y, ComplexField) else y
        return self._wrap(self.m_values * convolve_adjoint(self.kernel, values), y)

    def assemble_dense(self, cap=DENSE_CAP):
        """Explicit A as an (N, N) matrix, via kernel-table lookups."""
        g = self.grid
        if g.n > cap:
            raise ResourceLimitError(
                f"dense assembly refused: {g.n} points exceeds cap {cap}")
        pz, px = self.kernel.padded_shape
        iz, ix = np.divmod(np.arange(g.n), g.nx)
        m_flat = self.m_values.ravel()
        a = np.empty((g.n, g.n), dtype=np.complex128)
        for start in range(0, g.n, _DENSE_BLOCK_ROWS):
            stop = min(start + _DENSE_BLOCK_ROWS, g.n)
            oz = (iz[start:stop, None] - iz[None, :]) % pz
            ox = (ix[start:stop, None] - ix[None, :]) % px
            a[start:stop] = self.kernel.samples[oz, ox] * m_flat[None, :]
        return a


def linear_system_view(kernel, medium, u0):
    return LinearSystemView(kernel, medium, u0)


def residual(view, us):
    """r = (I - A) us - b; identically zero at the exact solution."""
    values = us.values if isinstance(us, ComplexField) else us
    a_us = view.apply_A(values)
    r = values - a_us - view.b.values
    return ComplexField(view.grid, r) if isinstance(us, ComplexField) else r
