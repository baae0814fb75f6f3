import dataclasses

import numpy as np
import pytest
import scipy.ndimage

from wavex.errors import DegenerateField, InvalidWavenumber
from wavex import helmholtz as hh


class TestMedium:
    def test_zero_noise_degenerate(self):
        with pytest.raises(DegenerateField):
            hh.medium_from_noise(np.zeros((64, 64)))

    def test_clip_bounds(self):
        for seed in range(5):
            med = hh.sample_medium(seed)
            assert np.all(med.n >= 0.6) and np.all(med.n <= 1.4)

    def test_normalization_before_clip(self):
        rng = np.random.default_rng(123)
        noise = rng.standard_normal((64, 64))
        smoothed = scipy.ndimage.gaussian_filter(noise, sigma=8.0, mode="reflect",
                                                 truncate=4.0)
        g = (smoothed - smoothed.mean()) / smoothed.std()
        assert abs(g.mean()) <= 1e-12
        assert abs(g.std() - 1.0) <= 1e-12
        med = hh.medium_from_noise(noise)
        # clip leaves interior values untouched: reconstruct g there
        interior = (np.abs(med.n - 1.0) < 0.25 * 1.599)
        assert np.allclose(med.n[interior], 1.0 + 0.25 * g[interior])

    def test_determinism(self):
        assert np.array_equal(hh.sample_medium(9).n, hh.sample_medium(9).n)


class TestSource:
    def test_modulus_isotropic(self):
        src = hh.build_source()
        x, y = hh.grid_coords()
        r = np.hypot(x - 0.30, y - 0.50)
        expected = np.exp(-r**2 / (2 * hh.SOURCE_SIGMA**2))
        assert np.allclose(np.abs(src.s), expected, rtol=1e-12)

    def test_peak_near_center(self):
        src = hh.build_source()
        i, j = np.unravel_index(np.argmax(np.abs(src.s)), src.s.shape)
        x, y = hh.grid_coords()
        h = 1.0 / 63
        assert abs(x[i, j] - 0.30) <= h and abs(y[i, j] - 0.50) <= h

    def test_value_at_center_formula(self):
        # continuous formula at the center and one sigma along the ramp axis
        def s_at(px, py):
            dx, dy = px - 0.30, py - 0.50
            ramp = (dx * hh.SOURCE_DIR[0] + dy * hh.SOURCE_DIR[1]) / hh.SOURCE_SIGMA
            return (np.exp(-(dx * dx + dy * dy) / (2 * hh.SOURCE_SIGMA**2))
                    * np.exp(1j * hh.SOURCE_BETA * ramp))

        assert s_at(0.30, 0.50) == pytest.approx(1.0 + 0.0j)
        p = (0.30 + hh.SOURCE_SIGMA * hh.SOURCE_DIR[0],
             0.50 + hh.SOURCE_SIGMA * hh.SOURCE_DIR[1])
        v = s_at(*p)
        assert abs(v) == pytest.approx(np.exp(-0.5), rel=1e-12)
        assert np.angle(v) == pytest.approx(hh.SOURCE_BETA, rel=1e-12)


class TestSponge:
    def test_zero_in_interior(self):
        sponge = hh.build_sponge()
        x, y = hh.grid_coords()
        inside = (np.minimum(x, 1 - x) > 0.15) & (np.minimum(y, 1 - y) > 0.15)
        assert np.all(sponge.sigma[inside] == 0.0)

    def test_corner_saturated(self):
        sponge = hh.build_sponge()
        assert sponge.sigma[0, 0] == pytest.approx(3.0)

    def test_half_width_ramp(self):
        # at x = 0.075 (half the sponge width), mid-height: 1.5 * 0.5^2
        x, y = hh.grid_coords()
        d_x = np.minimum(x, 1 - x)
        d_y = np.minimum(y, 1 - y)
        sig = hh.SPONGE_STRENGTH * (np.clip((0.15 - d_x) / 0.15, 0, None) ** 2
                                    + np.clip((0.15 - d_y) / 0.15, 0, None) ** 2)
        assert np.allclose(hh.build_sponge().sigma, sig)
        # continuous spot value
        assert 1.5 * ((0.15 - 0.075) / 0.15) ** 2 == pytest.approx(0.375)


def unit_system(k=10.0, grid=64, sigma=None):
    med = hh.Medium(n=np.ones((grid, grid)), seed=-1)
    src = hh.build_source(grid)
    sponge = hh.build_sponge(grid)
    if sigma is not None:
        sponge = dataclasses.replace(sponge, sigma=sigma)
    return hh.assemble(med, src, sponge, k)


class TestAssemble:
    def test_constant_coefficient_diagonal(self):
        g = 64
        sys_ = unit_system(k=10.0, grid=g, sigma=np.zeros((g, g)))
        h = 1.0 / (g - 1)
        diag = sys_.matrix.diagonal()
        assert np.allclose(diag, 4.0 / h**2 - 100.0)

    def test_row_nnz_at_most_five(self):
        med = hh.sample_medium(0)
        sys_ = hh.assemble(med, hh.build_source(), hh.build_sponge(), 25.0)
        csr = sys_.matrix.tocsr()
        assert int(np.max(np.diff(csr.indptr))) <= 5

    def test_complex_symmetric(self):
        g = 64
        sys_ = unit_system(k=10.0, grid=g, sigma=np.zeros((g, g)))
        diff = sys_.matrix - sys_.matrix.T
        assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0

    def test_invalid_wavenumber(self):
        med = hh.sample_medium(0)
        with pytest.raises(InvalidWavenumber):
            hh.assemble(med, hh.build_source(), hh.build_sponge(), 0.0)


class TestSolve:
    @pytest.mark.parametrize("method", ["iterative", "direct"])
    def test_manufactured_solution(self, method):
        rng = np.random.default_rng(5)
        med = hh.sample_medium(11)
        sys_ = hh.assemble(med, hh.build_source(), hh.build_sponge(), 25.0)
        u_star = rng.standard_normal(sys_.rhs.shape) + 1j * rng.standard_normal(sys_.rhs.shape)
        forced = dataclasses.replace(sys_, rhs=sys_.matrix @ u_star)
        u = hh.solve(forced, medium=med, method=method)
        rec = u.values[1:-1, 1:-1].ravel()
        assert np.linalg.norm(rec - u_star) / np.linalg.norm(u_star) <= 1e-7

    def test_zero_rhs(self):
        sys_ = unit_system()
        forced = dataclasses.replace(sys_, rhs=np.zeros_like(sys_.rhs))
        u = hh.solve(forced, method="auto")
        assert np.all(u.values == 0.0)

    @pytest.mark.parametrize("k", [10.0, 25.0, 50.0])
    def test_residual_contract(self, k):
        med = hh.sample_medium(int(k))
        sys_ = hh.assemble(med, hh.build_source(), hh.build_sponge(), k)
        u = hh.solve(sys_, medium=med, method="auto")
        interior = u.values[1:-1, 1:-1].ravel()
        res = np.linalg.norm(sys_.matrix @ interior - sys_.rhs) / np.linalg.norm(sys_.rhs)
        assert res <= 1e-8

    def test_linearity(self):
        sys_ = unit_system(k=15.0)
        u1 = hh.solve(sys_, method="direct").values
        scaled = dataclasses.replace(sys_, rhs=3.5 * sys_.rhs)
        u2 = hh.solve(scaled, method="direct").values
        assert np.allclose(u2, 3.5 * u1, rtol=1e-9, atol=1e-12)

    def test_exterior_ring_zero(self):
        sys_ = unit_system(k=20.0)
        u = hh.solve(sys_, method="direct").values
        assert np.all(u[0, :] == 0) and np.all(u[-1, :] == 0)
        assert np.all(u[:, 0] == 0) and np.all(u[:, -1] == 0)

    def test_iteration_cap_raises(self):
        from wavex.errors import NoConvergence
        med = hh.sample_medium(1)
        sys_ = hh.assemble(med, hh.build_source(), hh.build_sponge(), 50.0)
        with pytest.raises(NoConvergence):
            hh.solve_iterative(sys_, maxiter=1)

    def test_singular_system_raises(self):
        from wavex.errors import SingularSystem
        import scipy.sparse as sp
        sys_ = unit_system(k=10.0)
        n = sys_.matrix.shape[0]
        singular = dataclasses.replace(
            sys_, matrix=sp.csc_matrix((n, n), dtype=np.complex128))
        with pytest.raises(SingularSystem):
            hh.solve_direct(singular)

    def test_sponge_absorbs_boundary_energy(self):
        med = hh.sample_medium(3)
        sys_ = hh.assemble(med, hh.build_source(), hh.build_sponge(), 25.0)
        u = np.abs(hh.solve(sys_, medium=med, method="direct").values)
        ring = np.ones((64, 64), dtype=bool)
        ring[4:-4, 4:-4] = False
        center = np.zeros((64, 64), dtype=bool)
        center[24:40, 24:40] = True
        assert u[ring].mean() < u[center].mean()


class TestRefinement:
    def test_second_order_convergence(self):
        # nested corner-anchored grids: 64 -> 127 -> 253 halve h exactly
        sols = {}
        for g in (64, 127, 253):
            med = hh.Medium(n=np.ones((g, g)), seed=-1)
            sys_ = hh.assemble(med, hh.build_source(g), hh.build_sponge(g), 10.0)
            sols[g] = hh.solve(sys_, method="direct").values
        j = np.arange(64)
        u64 = sols[64]
        u127 = sols[127][np.ix_(2 * j, 2 * j)]
        u253 = sols[253][np.ix_(4 * j, 4 * j)]
        e_coarse = np.linalg.norm(u64 - u127)
        e_fine = np.linalg.norm(u127 - u253)
        ratio = e_coarse / e_fine
        assert 4.0 * 0.7 <= ratio <= 4.0 * 1.3


class TestGenerateDataset:
    def test_spectral_sets(self):
        assert hh.LF_WAVENUMBERS == (10.0, 15.0, 20.0, 25.0)
        assert hh.HF_WAVENUMBERS == (30.0, 37.5, 50.0)

    def test_determinism_and_bounds(self):
        d1 = hh.generate_dataset(seed=1, ks=(10.0, 30.0), n_per_k=2, grid=32)
        d2 = hh.generate_dataset(seed=1, ks=(10.0, 30.0), n_per_k=2, grid=32)
        assert np.array_equal(d1.re, d2.re) and np.array_equal(d1.im, d2.im)
        assert np.all(d1.inputs[:, 0] >= 0.6) and np.all(d1.inputs[:, 0] <= 1.4)

    def test_media_shared_across_k(self):
        d = hh.generate_dataset(seed=2, ks=(10.0, 20.0), n_per_k=3, grid=32)
        n_at_10 = d.inputs[d.nus == 10.0][:, 0]
        n_at_20 = d.inputs[d.nus == 20.0][:, 0]
        assert np.array_equal(n_at_10, n_at_20)

    def test_solver_error_carries_sample_index(self, monkeypatch):
        from wavex.errors import NoConvergence

        real_solve = hh.solve
        calls = []

        def failing_solve(system, medium=None, method="direct"):
            calls.append(1)
            if len(calls) == 3:
                raise NoConvergence("cap hit")
            return real_solve(system, medium=medium, method=method)

        monkeypatch.setattr(hh, "solve", failing_solve)
        with pytest.raises(NoConvergence) as err:
            hh.generate_dataset(seed=0, ks=(10.0,), n_per_k=4, grid=32)
        assert "sample 2" in str(err.value)

    def test_worker_pool_matches_serial(self, monkeypatch):
        serial = hh.generate_dataset(seed=4, ks=(10.0, 15.0), n_per_k=2, grid=32)
        monkeypatch.setenv("WAVEX_THREADS", "3")
        pooled = hh.generate_dataset(seed=4, ks=(10.0, 15.0), n_per_k=2, grid=32)
        assert np.array_equal(serial.re, pooled.re)
        assert np.array_equal(serial.im, pooled.im)
