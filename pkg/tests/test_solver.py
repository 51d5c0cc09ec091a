"""Fixed-point solver against a dense linear-system oracle and its contracts."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import dense_fixed_point_solution, disc_rve

from microhom.errors import NonConvergenceError, ZeroMeanStressError
from microhom.green import CONTINUOUS, ROTATED, make_freq_grid
from microhom.microstructure import assign_properties
from microhom.solver import SolverConfig, convergence_metric, solve_unit_load
from microhom.voigt import IsotropicProps, stiffness_from_enu


class TestHomogeneous:
    def test_one_iteration_exact(self):
        c = stiffness_from_enu(IsotropicProps(5.0, 0.3))
        c_field = np.broadcast_to(c, (32, 32, 3, 3)).copy()
        for macro in ([1.0, 0.0, 0.0], [0.2, -0.4, 0.9]):
            res = solve_unit_load(c_field, macro, SolverConfig())
            assert res.converged
            assert res.iterations == 1
            assert np.abs(res.strain - np.asarray(macro)).max() <= 1e-12


class TestDenseOracle:
    @pytest.mark.parametrize("scheme", [CONTINUOUS, ROTATED])
    @pytest.mark.parametrize("load", [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    def test_16px_inclusion(self, scheme, load):
        # the continuous scheme needs an odd grid for tight tolerances
        T = 17 if scheme == CONTINUOUS else 16
        c_field = disc_rve(T, 4, contrast=10.0)
        res = solve_unit_load(
            c_field, load, SolverConfig(scheme=scheme, tol=1e-10), domain=(float(T),) * 2
        )
        oracle = dense_fixed_point_solution(c_field, load, scheme, (float(T),) * 2)
        rel = np.linalg.norm(res.strain - oracle) / np.linalg.norm(oracle)
        assert rel <= 1e-6


class TestMeanFieldAndHistory:
    def test_mean_preserved_every_iteration(self):
        c_field = disc_rve(16, 4, contrast=10.0)
        macro = [0.3, -0.1, 0.2]
        res = solve_unit_load(c_field, macro, SolverConfig(record_history=True, tol=1e-8))
        assert res.mean_strain_history is not None
        dev = np.abs(res.mean_strain_history - np.asarray(macro)).max()
        assert dev <= 1e-10

    def test_residual_trend(self):
        # allows local oscillation but catches divergence
        c_field = disc_rve(32, 8, contrast=25.0)
        res = solve_unit_load(c_field, [1, 0, 0], SolverConfig(tol=1e-9))
        h = res.residual_history
        for n in range(len(h) - 10):
            assert h[n + 10] < h[n]

    def test_contrast_iteration_ordering(self):
        iters = []
        for contrast in (2.0, 10.0, 25.0):
            c_field = disc_rve(32, 8, contrast=contrast)
            res = solve_unit_load(c_field, [1, 0, 0], SolverConfig())
            iters.append(res.iterations)
        assert iters[0] <= iters[1] <= iters[2]

    def test_real_field_closure(self):
        c_field = disc_rve(32, 8, contrast=25.0)
        res = solve_unit_load(c_field, [0, 0, 1], SolverConfig())
        assert res.imag_residue <= 1e-10


class TestEdges:
    def test_zero_load_short_circuits(self):
        c_field = disc_rve(16, 4, contrast=10.0)
        res = solve_unit_load(c_field, [0.0, 0.0, 0.0], SolverConfig())
        assert res.converged
        assert res.iterations == 0
        assert np.all(res.strain == 0.0) and np.all(res.stress == 0.0)

    def test_nonconvergence_carries_history(self):
        c_field = disc_rve(16, 4, contrast=25.0)
        with pytest.raises(NonConvergenceError) as exc:
            solve_unit_load(c_field, [1, 0, 0], SolverConfig(tol=1e-12, max_iter=3))
        assert len(exc.value.history) == 3

    def test_metric_rejects_zero_mean_stress(self):
        grid = make_freq_grid((8, 8), (8.0, 8.0))
        stress_hat = np.zeros((8, 8, 3), dtype=complex)
        stress_hat[1, 2] = [1.0, 0.5, 0.1]  # fluctuation only, no mean
        with pytest.raises(ZeroMeanStressError):
            convergence_metric(stress_hat, grid)

    def test_metric_zero_for_uniform_stress(self):
        grid = make_freq_grid((8, 8), (8.0, 8.0))
        stress = np.broadcast_to([2.0, 1.0, 0.3], (8, 8, 3))
        stress_hat = np.fft.fft2(stress, axes=(0, 1))
        assert convergence_metric(stress_hat, grid) <= 1e-14


class TestLaminateClosedForm:
    def test_shear_harmonic_mean(self):
        # two equal slabs normal to x: converged sigma12 must be uniform and
        # the effective shear response the harmonic mean of 2*mu
        T = 16
        grid = np.zeros((T, T), np.uint8)
        grid[: T // 2] = 1
        fiber, matrix = IsotropicProps(4.0, 0.0), IsotropicProps(1.0, 0.0)
        c_field = assign_properties(grid, fiber, matrix)
        res = solve_unit_load(c_field, [0, 0, 1.0], SolverConfig(tol=1e-12))
        mu_f, mu_m = 2.0, 0.5  # E/(2(1+nu))
        harm = 2.0 / (0.5 / mu_f + 0.5 / mu_m) / 2.0
        assert_allclose(res.stress[..., 2], 2 * harm, rtol=1e-9)

    def test_normal_harmonic_mean(self):
        T = 16
        grid = np.zeros((T, T), np.uint8)
        grid[: T // 2] = 1
        fiber, matrix = IsotropicProps(10.0, 0.3), IsotropicProps(1.0, 0.2)
        c_field = assign_properties(grid, fiber, matrix)
        res = solve_unit_load(c_field, [1.0, 0, 0], SolverConfig(tol=1e-12))
        # sigma11 uniform; effective (lam+2mu) is the harmonic mean
        beta = c_field[..., 0, 0]
        harm = 1.0 / np.mean(1.0 / beta)
        assert_allclose(res.stress[..., 0], harm, rtol=1e-9)
        assert_allclose(res.stress[..., 0].std(), 0.0, atol=1e-9)
