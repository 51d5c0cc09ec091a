"""Discrete frequency grids and the periodic isotropic Green operator.

The operator is assembled in Fourier space on the full FFT grid, either from
the continuous frequency vectors or from rotated-grid modified frequencies
(a finite-difference-consistent discretization that suppresses ringing).

Storage convention: the per-frequency 3x3 matrices are the symmetric Voigt
form in which both the shear row and the shear column carry the pair factor 2.
Contracting such a matrix with a tensorial-shear 3-vector therefore requires
halving the third component of the plain matrix-vector product; that is what
:func:`apply_green` does.  The stiffness matrices of :mod:`.voigt` only carry
the column factor, so they contract by plain product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMediumError, DomainError
from .voigt import Lame

CONTINUOUS = "continuous"
ROTATED = "rotated"
SCHEMES = (CONTINUOUS, ROTATED)


@dataclass(frozen=True)
class FreqGrid:
    """Per-pixel frequency components (rad/length) of a T1 x T2 FFT grid."""

    xi1: np.ndarray
    xi2: np.ndarray
    h1: float
    h2: float
    scheme: str

    @property
    def shape(self):
        return self.xi1.shape


@dataclass(frozen=True)
class GreenField:
    """Precomputed Green operator: one symmetric 3x3 matrix per frequency.

    Immutable after construction; safe to share across concurrent solves.
    """

    g: np.ndarray  # (T1, T2, 3, 3)
    lame0: Lame
    scheme: str


def frequency_vector(T: int, h: float) -> np.ndarray:
    """FFT-ordered angular frequencies for T pixels of size h.

    (2*pi/(h*T)) * [0, 1, ..., T/2-1, -T/2, ..., -1]        for even T
    (2*pi/(h*T)) * [0, 1, ..., (T-1)/2, -(T-1)/2, ..., -1]  for odd T

    Entry 0 is exactly 0.0.
    """
    if T < 1:
        raise DomainError(f"pixel count must be >= 1, got {T}")
    if not h > 0:
        raise DomainError(f"pixel size must be positive, got {h}")
    if T % 2 == 0:
        k = np.concatenate([np.arange(0, T // 2), np.arange(-T // 2, 0)])
    else:
        k = np.concatenate([np.arange(0, (T - 1) // 2 + 1), np.arange(-(T - 1) // 2, 0)])
    return (2.0 * np.pi / (h * T)) * k.astype(float)


def make_freq_grid(resolution, domain, scheme: str = CONTINUOUS) -> FreqGrid:
    """Build the 2D frequency grid for a periodic cell.

    Args:
        resolution: (T1, T2) pixel counts.
        domain: (L1, L2) physical cell size; pixel sizes are L_i / T_i.
        scheme: "continuous" or "rotated".
    """
    T1, T2 = int(resolution[0]), int(resolution[1])
    L1, L2 = float(domain[0]), float(domain[1])
    h1, h2 = L1 / T1, L2 / T2
    f1 = frequency_vector(T1, h1)
    f2 = frequency_vector(T2, h2)
    xi1, xi2 = np.meshgrid(f1, f2, indexing="ij")
    grid = FreqGrid(xi1, xi2, h1, h2, CONTINUOUS)
    if scheme == CONTINUOUS:
        return grid
    if scheme == ROTATED:
        return modified_frequencies(grid)
    raise DomainError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")


def modified_frequencies(grid: FreqGrid) -> FreqGrid:
    """Rotated-grid modified frequencies.

    With theta_i = h_i * xi_i the per-pixel phase angle,

        xi1~ = (2/h1) sin(theta1/2) cos(theta2/2)
        xi2~ = (2/h2) cos(theta1/2) sin(theta2/2)

    The trig factors are built per axis so that the analytic zeros (the DC bin
    and, on even grids, the Nyquist cosine) are exact rather than ~1e-16; the
    Green operator relies on |xi~| == 0 being an exact test.
    """
    if grid.scheme != CONTINUOUS:
        raise DomainError("modified_frequencies expects a continuous-scheme grid")
    T1, T2 = grid.shape
    half1 = 0.5 * grid.h1 * grid.xi1[:, 0]
    half2 = 0.5 * grid.h2 * grid.xi2[0, :]
    s1, c1 = np.sin(half1), np.cos(half1)
    s2, c2 = np.sin(half2), np.cos(half2)
    if T1 % 2 == 0:
        c1[T1 // 2] = 0.0  # cos(-pi/2), exact zero at the Nyquist bin
    if T2 % 2 == 0:
        c2[T2 // 2] = 0.0
    xi1 = (2.0 / grid.h1) * np.outer(s1, c2)
    xi2 = (2.0 / grid.h2) * np.outer(c1, s2)
    return FreqGrid(xi1, xi2, grid.h1, grid.h2, ROTATED)


def green_operator(grid: FreqGrid, lame0: Lame) -> GreenField:
    """Assemble the periodic isotropic Green operator for a reference medium.

    At nonzero frequency,

        G0 = (1/(4*mu0)) * G1 + ((mu0+lam0)/(mu0*(2*mu0+lam0))) * G2

    with the symmetric Voigt matrices

        G1 = [[4 x1^2,  0,      4 x1 x2 ],          G2 = -[[x1^4,      x1^2 x2^2, 2 x1^3 x2],
              [0,       4 x2^2, 4 x1 x2 ],  / |x|^2       [x1^2 x2^2, x2^4,      2 x1 x2^3],   / |x|^4
              [4 x1 x2, 4 x1 x2, 4|x|^2 ]]               [2 x1^3 x2, 2 x1 x2^3, 4 x1^2 x2^2]]

    Frequencies with |xi| == 0 (the DC bin, plus the Nyquist corner of a
    rotated grid) get the zero matrix, written as an explicit special case.
    """
    lam0, mu0 = lame0.lam, lame0.mu
    if 2.0 * mu0 + lam0 == 0.0:
        raise DegenerateMediumError("reference medium has 2*mu0 + lam0 == 0")
    x1, x2 = grid.xi1, grid.xi2
    nsq = x1 * x1 + x2 * x2
    zero = nsq == 0.0
    n2 = np.where(zero, 1.0, nsq)
    n4 = n2 * n2

    g = np.empty(grid.shape + (3, 3))
    c1 = 1.0 / (4.0 * mu0)
    c2 = (mu0 + lam0) / (mu0 * (2.0 * mu0 + lam0))

    g[..., 0, 0] = c1 * (4.0 * x1 * x1) / n2 - c2 * (x1**4) / n4
    g[..., 1, 1] = c1 * (4.0 * x2 * x2) / n2 - c2 * (x2**4) / n4
    g[..., 2, 2] = c1 * (4.0 * nsq) / n2 - c2 * (4.0 * x1 * x1 * x2 * x2) / n4
    g[..., 0, 1] = -c2 * (x1 * x1 * x2 * x2) / n4
    g[..., 0, 2] = c1 * (4.0 * x1 * x2) / n2 - c2 * (2.0 * x1**3 * x2) / n4
    g[..., 1, 2] = c1 * (4.0 * x1 * x2) / n2 - c2 * (2.0 * x1 * x2**3) / n4
    g[..., 1, 0] = g[..., 0, 1]
    g[..., 2, 0] = g[..., 0, 2]
    g[..., 2, 1] = g[..., 1, 2]
    g[zero] = 0.0

    if grid.scheme == CONTINUOUS:
        # Unpaired Nyquist lines of an even grid alias +pi and -pi; a real
        # field cannot distinguish them, so the operator there must be the
        # average over the two aliases.  The shear-coupling entries are odd
        # in each frequency component and cancel in that average; the rotated
        # scheme needs nothing because its modified frequencies already
        # vanish on those lines.
        T1, T2 = grid.shape
        for axis, T in ((0, T1), (1, T2)):
            if T % 2 == 0:
                sl = [slice(None), slice(None)]
                sl[axis] = T // 2
                for i, j in ((0, 2), (1, 2), (2, 0), (2, 1)):
                    g[tuple(sl) + (i, j)] = 0.0
    return GreenField(g, lame0, grid.scheme)


def apply_green(g: np.ndarray, field: np.ndarray) -> np.ndarray:
    """Contract the stored Green matrices with a tensorial-shear vector field.

    The symmetric storage doubles the shear row as well as the shear column,
    so the tensor contraction is the plain product with its third component
    halved.
    """
    out = np.einsum("...ij,...j->...i", g, field)
    out[..., 2] *= 0.5
    return out


def reference_material(lam_grid: np.ndarray, mu_grid: np.ndarray) -> Lame:
    """Midpoint reference medium: lam0 = (min lam + max lam)/2, same for mu."""
    lam_grid = np.asarray(lam_grid)
    mu_grid = np.asarray(mu_grid)
    if lam_grid.size == 0 or mu_grid.size == 0:
        raise DomainError("reference_material needs a nonempty field")
    lam0 = 0.5 * (lam_grid.min() + lam_grid.max())
    mu0 = 0.5 * (mu_grid.min() + mu_grid.max())
    return Lame(float(lam0), float(mu0))


def lame_fields_from_stiffness(c_field: np.ndarray):
    """Recover per-pixel (lam, mu) grids from an isotropic stiffness field."""
    c_field = np.asarray(c_field)
    lam = c_field[..., 0, 1]
    mu = 0.5 * c_field[..., 2, 2]
    return lam, mu
