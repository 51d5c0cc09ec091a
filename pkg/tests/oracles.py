"""Independent reference computations shared by the test modules."""

import numpy as np

from microhom.green import (
    apply_green,
    green_operator,
    lame_fields_from_stiffness,
    make_freq_grid,
    reference_material,
)
from microhom.microstructure import assign_properties
from microhom.voigt import IsotropicProps, stiffness_from_lame


def dense_fixed_point_solution(c_field, macro, scheme, domain):
    """Direct solve of the fixed-point map as one dense linear system.

    Assembles eps = ebar - F^-1 G F (C - C0) eps over all T1*T2*3 unknowns by
    applying the map to every basis vector, then solves with a dense LU.
    Shares the operator definition with the solver but none of its iteration.
    """
    T1, T2 = c_field.shape[:2]
    n = T1 * T2 * 3
    grid = make_freq_grid((T1, T2), domain, scheme)
    lam, mu = lame_fields_from_stiffness(c_field)
    green = green_operator(grid, reference_material(lam, mu))
    dc = c_field - stiffness_from_lame(green.lame0)

    def apply_map(vec):
        e = vec.reshape(T1, T2, 3)
        tau = np.einsum("xyij,xyj->xyi", dc, e)
        upd = apply_green(green.g, np.fft.fft2(tau, axes=(0, 1)))
        return np.fft.ifft2(upd, axes=(0, 1)).reshape(n)

    m = np.empty((n, n))
    basis = np.zeros(n)
    for k in range(n):
        basis[k] = 1.0
        m[:, k] = apply_map(basis).real
        basis[k] = 0.0
    rhs = np.tile(np.asarray(macro, dtype=float), T1 * T2)
    return np.linalg.solve(np.eye(n) + m, rhs).reshape(T1, T2, 3)


def disc_rve(T, radius_px, contrast, center=None):
    """Single circular inclusion of the given pixel radius and E contrast."""
    cx, cy = center or (T // 2, T // 2 - 1)
    yy, xx = np.mgrid[0:T, 0:T]
    grid = ((xx - cx) ** 2 + (yy - cy) ** 2 <= radius_px**2).astype(np.uint8)
    return assign_properties(
        grid, IsotropicProps(contrast, 0.25), IsotropicProps(1.0, 0.35)
    )
