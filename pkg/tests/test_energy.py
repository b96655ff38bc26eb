import numpy as np
import pytest

from branchlab import elliptic, energy
from branchlab.core import Anchor, Magnetisation, Mode, StrayField, SubCuboid
from branchlab.errors import NumericalCheckError

from conftest import make_grid, random_field_values, random_relaxed, random_sharp


class TestInterfacial:
    def test_single_wall_periodic(self):
        grid = make_grid(d=1, n_h=8, n_v=4, T=2.0, bc="periodic")
        values = np.tile(np.repeat([1.0, -1.0], 4), (4, 1))
        m = Magnetisation(grid, values, Mode.SHARP)
        assert energy.interfacial_energy(m) == pytest.approx(4 * grid.T, rel=1e-13)

    def test_single_wall_zero_flux(self):
        grid = make_grid(d=1, n_h=8, n_v=4, T=2.0, bc="zero-flux")
        values = np.tile(np.repeat([1.0, -1.0], 4), (4, 1))
        m = Magnetisation(grid, values, Mode.SHARP)
        assert energy.interfacial_energy(m) == pytest.approx(2 * grid.T, rel=1e-13)

    def test_extruded_wall_2d(self):
        grid = make_grid(d=2, n_h=8, n_v=4, L=3.0, T=2.0, bc="periodic")
        values = np.tile(np.repeat([1.0, -1.0], 4)[:, None], (4, 1, 8))
        m = Magnetisation(grid, values, Mode.SHARP)
        assert energy.interfacial_energy(m) == pytest.approx(
            4 * grid.T * 2 * grid.L[1], rel=1e-13
        )

    def test_sub_window_counts_interior_facets_only(self):
        grid = make_grid(d=1, n_h=8, n_v=4, bc="periodic")
        values = np.tile(np.repeat([1.0, -1.0], 4), (4, 1))
        m = Magnetisation(grid, values, Mode.SHARP)
        sub = SubCuboid(a=(0.0,), l=0.5, t=grid.T)
        # window [-0.5, 0.5) = cells 2..5 contains the facet at x=0 only
        assert energy.interfacial_energy(m, sub) == pytest.approx(2 * grid.T, rel=1e-13)


class TestMinimalField:
    def test_least_squares_oracle_periodic(self):
        grid = make_grid(d=1, n_h=8, n_v=3, bc="periodic")
        m = random_relaxed(grid, seed=5)
        h = energy.minimal_stray_field(m)
        from branchlab.core import vertical_charge

        c = vertical_charge(m)
        n = grid.n_h[0]
        D = (np.eye(n) - np.roll(np.eye(n), 1, axis=1)).T / grid.dx[0]
        for j in range(grid.n_v):
            want = np.linalg.pinv(D) @ (-c[j])
            np.testing.assert_allclose(h.values[j, :, 0], want, atol=1e-8)

    def test_least_squares_oracle_zero_flux(self):
        grid = make_grid(d=1, n_h=8, n_v=2, bc="zero-flux")
        m = random_relaxed(grid, seed=7)
        h = energy.minimal_stray_field(m)
        from branchlab.core import vertical_charge

        c = vertical_charge(m)
        n = grid.n_h[0]
        D = np.zeros((n, n))
        for i in range(n):
            D[i, i] = 1.0 / grid.dx[0]
            if i:
                D[i, i - 1] = -1.0 / grid.dx[0]
        for j in range(grid.n_v):
            want = np.linalg.solve(D, -c[j])
            np.testing.assert_allclose(h.values[j, :, 0], want, atol=1e-8)

    def test_nonzero_slice_mean_rejected(self):
        grid = make_grid(d=1, n_h=4, n_v=2)
        m = Magnetisation(grid, np.full(grid.m_shape, 1.0), Mode.SHARP)
        with pytest.raises(ValueError):
            energy.minimal_stray_field(m)

    def test_threads_bitwise_identical(self):
        grid = make_grid(d=2, n_h=16, n_v=8, bc="zero-flux")
        m = random_relaxed(grid, seed=9)
        a = energy.minimal_stray_field(m, threads=1)
        b = energy.minimal_stray_field(m, threads=3)
        assert np.array_equal(a.values, b.values)


class TestStrayEnergy:
    @pytest.mark.parametrize("bc", ["periodic", "zero-flux"])
    def test_stripe_boundary_sheet_formula(self, bc):
        grid = make_grid(d=1, n_h=16, n_v=8, T=2.0, bc=bc)
        profile = np.repeat([1.0, -1.0], 8)
        m = Magnetisation(grid, np.tile(profile, (8, 1)), Mode.SHARP)
        x = elliptic.inv_grad_sq_norm(profile, grid.dx, (bc,))
        want = x / grid.dz
        assert energy.stray_energy_minimal(m) == pytest.approx(want, rel=1e-12)
        h = energy.minimal_stray_field(m)
        assert energy.field_energy(h) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("d", [1, 2])
    def test_streamed_matches_field(self, d):
        grid = make_grid(d=d, n_h=8, n_v=4, bc="zero-flux")
        m = random_relaxed(grid, seed=11)
        h = energy.minimal_stray_field(m)
        assert energy.stray_energy_minimal(m) == pytest.approx(
            energy.field_energy(h), rel=1e-12
        )

    def test_breakdown_arithmetic(self):
        grid = make_grid(d=1, n_h=8, n_v=4)
        m = random_sharp(grid, seed=13, zero_mean=True)
        e = energy.total_energy(m, sigma=2.5)
        assert e.total == pytest.approx(2.5 * e.interfacial + e.stray, rel=1e-13)
        assert e.density == pytest.approx(e.total / grid.volume, rel=1e-13)


class TestSlabAverages:
    def test_height_average_partial(self):
        grid = make_grid(d=1, n_h=4, n_v=4)
        h = StrayField(grid, np.arange(16, dtype=float).reshape(grid.h_shape))
        top = energy.height_average(h, n_slices=2, anchor=Anchor.TOP)
        np.testing.assert_allclose(top, h.values[2:].mean(axis=0))

    @pytest.mark.parametrize("seed", range(6))
    def test_orthogonality_exact(self, seed):
        grid = make_grid(d=2, n_h=8, n_v=8, bc="periodic")
        h = StrayField(grid, random_field_values(grid, seed))
        assert energy.orthogonality_gap(h) < 1e-12
        assert energy.orthogonality_gap(h, n_slices=3) < 1e-12
        assert energy.orthogonality_gap(h, n_slices=3, anchor=Anchor.TOP) < 1e-12


class TestMonotonicity:
    @pytest.mark.parametrize("seed", range(10))
    def test_profile_non_decreasing(self, seed):
        grid = make_grid(d=1, n_h=8, n_v=16)
        h = StrayField(grid, random_field_values(grid, 100 + seed))
        prof = energy.monotonicity_profile(h)
        assert prof[0] == 0.0
        assert np.all(np.diff(prof) >= -1e-12 * max(1.0, prof[-1]))

    def test_two_slice_value(self):
        grid = make_grid(d=1, n_h=2, n_v=2, L=1.0, T=1.0)
        vals = np.zeros(grid.h_shape)
        vals[0, :, 0] = 1.0
        vals[1, :, 0] = -1.0
        prof = energy.monotonicity_profile(StrayField(grid, vals))
        # p=2: mean |h - 0|^2 = 1, t = T, l = L
        assert prof[1] == pytest.approx(1.0, rel=1e-13)


class TestLocalStats:
    def test_constant_field_values(self):
        grid = make_grid(d=2, n_h=8, n_v=4, L=2.0, T=1.0, bc="periodic")
        m = Magnetisation(grid, np.ones(grid.m_shape), Mode.SHARP)
        vals = np.zeros(grid.h_shape)
        vals[..., 0] = 1.0
        h = StrayField(grid, vals)
        sub = SubCuboid(a=(0.0, 0.0), l=1.0, t=0.5)
        s = energy.local_stats(m, h, sub)
        assert s.l == pytest.approx(1.0)
        assert s.t == pytest.approx(0.5)
        assert s.f == pytest.approx(0.0, abs=1e-14)
        aspect = (s.t / s.l) ** 2
        assert s.f0 == pytest.approx(aspect * 0.5, rel=1e-13)
        assert s.n == pytest.approx(s.t / s.l, rel=1e-13)
        assert s.e == pytest.approx(0.5, rel=1e-13)

    def test_reconstruction_inequality(self):
        # e <= (l/t)^2 f + n^2 (l/t)^2 / 2 via the slab-average split
        grid = make_grid(d=1, n_h=16, n_v=8, bc="periodic")
        m = random_sharp(grid, seed=17, zero_mean=True)
        h = energy.minimal_stray_field(m)
        sub = SubCuboid(a=(0.0,), l=0.5, t=0.5)
        s = energy.local_stats(m, h, sub)
        inv_aspect = (s.l / s.t) ** 2
        assert s.e <= inv_aspect * s.f + 0.5 * inv_aspect * s.n**2 + 1e-12


class TestGoodWidth:
    def test_returns_smallest_candidate_for_flat_field(self):
        grid = make_grid(d=2, n_h=16, n_v=4, L=1.0, bc="periodic")
        vals = np.zeros(grid.h_shape)
        vals[..., 0] = 1.0
        h = StrayField(grid, vals)
        got = energy.good_width(h, 0.25, 0.5)
        assert got == pytest.approx(0.25)

    def test_skips_loaded_ring(self):
        grid = make_grid(d=1, n_h=32, n_v=2, L=1.0, bc="periodic")
        vals = np.full(grid.h_shape, 0.01)
        # half-width 0.25 ring = cells 12 and 19
        vals[:, 12, 0] = 50.0
        vals[:, 19, 0] = 50.0
        h = StrayField(grid, vals)
        got = energy.good_width(h, 0.25, 0.875, A=4.0)
        assert got == pytest.approx(0.3125)

    def test_no_ring_raises(self):
        grid = make_grid(d=1, n_h=8, n_v=2, L=1.0, bc="periodic")
        vals = np.zeros(grid.h_shape)
        vals[:, 2, 0] = 10.0
        vals[:, 5, 0] = 10.0
        h = StrayField(grid, vals)
        with pytest.raises(NumericalCheckError):
            energy.good_width(h, 0.5, 0.5, A=0.5)
