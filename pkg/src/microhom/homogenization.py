"""Strain concentration tensors and effective stiffness of a periodic cell.

The concentration field collects the three unit-load solutions column by
column; any macro strain then maps to its micro strain by a pixelwise matrix
product, and the volume average of C(x) A(x) is the homogenized stiffness.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError
from .green import green_operator, lame_fields_from_stiffness, make_freq_grid, reference_material
from .solver import SolverConfig, solve_unit_load

UNIT_LOADS = np.eye(3)

# Plain-matrix-vs-tensor column weights of the storage convention (see voigt).
_SHEAR_COLUMN = np.array([1.0, 1.0, 2.0])


@dataclass
class ConcentrationField:
    """Per-pixel strain concentration matrices A(x) with solve diagnostics.

    metadata carries per-load iteration counts and final residuals so dataset
    quality can be audited after the fact.
    """

    a: np.ndarray  # (T1, T2, 3, 3)
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.a.shape[:2]


def strain_concentration(
    c_field: np.ndarray, config: SolverConfig, domain=None
) -> ConcentrationField:
    """Solve the three orthogonal unit loads and assemble A(x).

    Column j of A(x) is the strain field under the unit macro strain e_j, so
    A(x) : ebar reproduces the micro strain of any load by superposition.
    The frequency grid and Green operator are built once and shared by the
    three solves.
    """
    c_field = np.asarray(c_field, dtype=float)
    T1, T2 = c_field.shape[:2]
    if domain is None:
        domain = (float(T1), float(T2))
    grid = make_freq_grid((T1, T2), domain, config.scheme)
    lam, mu = lame_fields_from_stiffness(c_field)
    green = green_operator(grid, reference_material(lam, mu))

    a = np.empty((T1, T2, 3, 3))
    loads = []
    for j in range(3):
        try:
            res = solve_unit_load(
                c_field, UNIT_LOADS[j], config, domain=domain, grid=grid, green=green
            )
        except NonConvergenceError as err:
            raise NonConvergenceError(f"unit load {j}: {err}", err.history) from err
        a[..., :, j] = res.strain
        loads.append(
            {
                "load": j,
                "iterations": res.iterations,
                "residual": res.residual_history[-1] if res.residual_history else 0.0,
                "converged": res.converged,
            }
        )
    return ConcentrationField(
        a,
        metadata={
            "loads": loads,
            "tol": config.tol,
            "scheme": config.scheme,
            "lame0": (green.lame0.lam, green.lame0.mu),
        },
    )


def homogenized_stiffness(c_field: np.ndarray, conc, symmetrize: bool = True):
    """Volume average Cbar = <C(x) A(x)> with optional symmetrization.

    The average is symmetrized in plain tensor components (the stored shear
    column carries a factor 2, so raw storage of a coupled stiffness is not
    itself a symmetric matrix).  The remaining asymmetry measures how well
    the converged solution honors major symmetry and is returned alongside;
    above 1e-6 * ||Cbar|| it is also surfaced as a warning.

    Returns:
        (cbar, asymmetry): the (3, 3) effective stiffness and the maximum
        plain-component asymmetry before symmetrization.
    """
    a = conc.a if isinstance(conc, ConcentrationField) else np.asarray(conc)
    c_field = np.asarray(c_field, dtype=float)
    if c_field.shape[:2] != a.shape[:2]:
        raise ValueError(f"grid shapes differ: {c_field.shape[:2]} vs {a.shape[:2]}")
    n_pix = a.shape[0] * a.shape[1]
    raw = np.einsum("xyij,xyjk->ik", c_field, a) / n_pix

    plain = raw / _SHEAR_COLUMN  # divide shear column: plain tensor components
    asymmetry = float(np.abs(plain - plain.T).max())
    norm = float(np.linalg.norm(raw))
    if norm > 0 and asymmetry > 1e-6 * norm:
        warnings.warn(
            f"homogenized stiffness asymmetry {asymmetry:.3e} exceeds 1e-6*||Cbar||",
            stacklevel=2,
        )
    if not symmetrize:
        return raw, asymmetry
    cbar = 0.5 * (plain + plain.T) * _SHEAR_COLUMN
    return cbar, asymmetry


def reconstruct_strain(conc, macro_strain) -> np.ndarray:
    """Micro strain field eps(x) = A(x) : ebar."""
    a = conc.a if isinstance(conc, ConcentrationField) else np.asarray(conc)
    macro = np.asarray(macro_strain, dtype=float).reshape(3)
    return np.einsum("xyij,j->xyi", a, macro)


def anisotropy_indicator(cbar: np.ndarray) -> float:
    """|C[0,0] - C[1,1]| / ||C||: departure of the cell from statistical isotropy."""
    cbar = np.asarray(cbar)
    norm = float(np.linalg.norm(cbar))
    if norm == 0.0:
        return 0.0
    return float(abs(cbar[0, 0] - cbar[1, 1]) / norm)


def reuss_voigt_bounds(c_field: np.ndarray):
    """Pixelwise bounds on the effective stiffness.

    Returns (C_reuss, C_voigt): the inverse of the mean pixel compliance and
    the mean pixel stiffness.
    """
    c_field = np.asarray(c_field, dtype=float)
    flat = c_field.reshape(-1, 3, 3)
    c_voigt = flat.mean(axis=0)
    c_reuss = np.linalg.inv(np.linalg.inv(flat).mean(axis=0))
    return c_reuss, c_voigt
