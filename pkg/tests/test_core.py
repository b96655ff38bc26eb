import numpy as np
import pytest

from branchlab import elliptic, energy
from branchlab.core import (
    Anchor,
    Bc,
    GridSpec,
    Magnetisation,
    Mode,
    StrayField,
    SubCuboid,
    anisotropic_rescale,
    check_admissibility,
    mirror_vertical,
    reflect_even,
    reflect_odd,
    restrict,
    vertical_charge,
)

from conftest import make_grid, random_relaxed, random_sharp


class TestGridSpec:
    def test_scalar_broadcast(self):
        g = GridSpec(d=2, n_h=8, n_v=4, L=2.0, T=1.0, bc=Bc.ZERO_FLUX)
        assert g.n_h == (8, 8)
        assert g.L == (2.0, 2.0)
        assert g.bc == (Bc.ZERO_FLUX, Bc.ZERO_FLUX)
        assert g.dx == (0.5, 0.5)
        assert g.dz == 0.25
        assert g.volume == pytest.approx(16.0)

    def test_per_axis(self):
        g = GridSpec(d=2, n_h=(8, 16), n_v=2, L=(1.0, 2.0), T=1.0)
        assert g.dx == (0.25, 0.25)
        assert g.m_shape == (2, 8, 16)
        assert g.h_shape == (2, 8, 16, 2)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            GridSpec(d=3, n_h=4, n_v=2, L=1.0, T=1.0)
        with pytest.raises(ValueError):
            GridSpec(d=1, n_h=0, n_v=2, L=1.0, T=1.0)
        with pytest.raises(ValueError):
            GridSpec(d=1, n_h=4, n_v=2, L=-1.0, T=1.0)
        with pytest.raises(ValueError):
            GridSpec(d=2, n_h=(4, 4, 4), n_v=2, L=1.0, T=1.0)


class TestFieldContainers:
    def test_sharp_validation(self, grid1):
        with pytest.raises(ValueError):
            Magnetisation(grid1, np.full(grid1.m_shape, 0.5), Mode.SHARP)

    def test_relaxed_range(self, grid1):
        with pytest.raises(ValueError):
            Magnetisation(grid1, np.full(grid1.m_shape, 1.2), Mode.RELAXED)
        Magnetisation(grid1, np.full(grid1.m_shape, 0.5), Mode.RELAXED)

    def test_shape_checked(self, grid1):
        with pytest.raises(ValueError):
            Magnetisation(grid1, np.ones((3, 3)), Mode.SHARP)
        with pytest.raises(ValueError):
            StrayField(grid1, np.ones(grid1.m_shape))

    def test_int_values_upcast(self, grid1):
        m = Magnetisation(grid1, np.ones(grid1.m_shape, dtype=np.int8), Mode.SHARP)
        assert m.values.dtype == np.float64


class TestVerticalCharge:
    def test_linear_profile_constant_charge(self):
        grid = make_grid(d=1, n_h=4, n_v=8, T=2.0)
        z = (np.arange(8) + 0.5) * grid.dz
        top = 0.6
        values = np.tile((z / grid.T * top)[:, None], (1, 4))
        m = Magnetisation(grid, values, Mode.RELAXED)
        c = vertical_charge(m, m_top=np.full(4, top))
        np.testing.assert_allclose(c, top / grid.T, atol=1e-13)

    def test_column_charges_at_faces(self):
        grid = make_grid(d=1, n_h=4, n_v=6)
        m = Magnetisation(grid, np.tile([1.0, 1.0, -1.0, -1.0], (6, 1)), Mode.SHARP)
        c = vertical_charge(m)
        dz = grid.dz
        np.testing.assert_allclose(c[0], m.values[0] / dz, atol=1e-13)
        np.testing.assert_allclose(c[-1], -m.values[-1] / dz, atol=1e-13)
        np.testing.assert_allclose(c[1:-1], 0.0, atol=1e-13)

    def test_single_slice_uses_both_traces(self):
        grid = make_grid(d=1, n_h=2, n_v=1)
        m = Magnetisation(grid, np.zeros((1, 2)), Mode.RELAXED)
        c = vertical_charge(m, m_bottom=0.2, m_top=0.8)
        np.testing.assert_allclose(c, (0.8 - 0.2) / grid.dz, atol=1e-13)


class TestAdmissibility:
    def test_zero_pair_passes(self, grid1):
        m = Magnetisation(grid1, np.zeros(grid1.m_shape), Mode.RELAXED)
        h = StrayField(grid1, np.zeros(grid1.h_shape))
        report = check_admissibility(m, h)
        assert report.passed
        assert report.max_residual == 0.0
        np.testing.assert_allclose(report.slice_means, 0.0)

    def test_unbalanced_charge_fails(self, grid1):
        values = np.zeros(grid1.m_shape)
        values[grid1.n_v // 2, 3] = 1.0
        m = Magnetisation(grid1, values, Mode.RELAXED)
        h = StrayField(grid1, np.zeros(grid1.h_shape))
        report = check_admissibility(m, h)
        assert not report.passed
        assert report.max_residual == pytest.approx(1.0 / (2 * grid1.dz), rel=1e-12)

    @pytest.mark.parametrize("d,bc", [(1, "periodic"), (1, "zero-flux"), (2, "periodic"), (2, "zero-flux")])
    def test_minimal_pair_admissible(self, d, bc):
        grid = make_grid(d=d, n_h=8, n_v=4, bc=bc)
        m = random_relaxed(grid, seed=21)
        h = energy.minimal_stray_field(m)
        report = check_admissibility(m, h)
        assert report.passed, report.max_residual

    def test_boundary_trace_misfit_reported(self, grid1):
        m = Magnetisation(grid1, np.ones(grid1.m_shape), Mode.SHARP)
        h = StrayField(grid1, np.zeros(grid1.h_shape))
        report = check_admissibility(m, h, m_top=1.0)
        assert report.boundary_mean_misfit[0] == pytest.approx(1.0)
        assert report.boundary_mean_misfit[1] == pytest.approx(0.0)


def admissible_pair(d, seed, n_h=8, n_v=4, bc="zero-flux"):
    grid = make_grid(d=d, n_h=n_h, n_v=n_v, bc=bc)
    m = random_relaxed(grid, seed=seed)
    return m, energy.minimal_stray_field(m)


class TestReflections:
    @pytest.mark.parametrize("d", [1, 2])
    def test_even_doubles_energy_exactly(self, d):
        m, h = admissible_pair(d, seed=31)
        axis = d - 1
        m2, h2 = reflect_even(m, h, axis)
        assert m2.grid.bc[axis] is Bc.PERIODIC
        assert m2.grid.n_h[axis] == 2 * m.grid.n_h[axis]
        assert m2.grid.L[axis] == 2 * m.grid.L[axis]
        e1 = energy.total_energy(m, h)
        e2 = energy.total_energy(m2, h2)
        assert e2.interfacial == pytest.approx(2 * e1.interfacial, rel=1e-12, abs=1e-12)
        assert e2.stray == pytest.approx(2 * e1.stray, rel=1e-12)
        assert check_admissibility(m2, h2).passed

    def test_even_rejects_wall_flux(self):
        grid = make_grid(d=1, n_h=8, n_v=4, bc="zero-flux")
        m = Magnetisation(grid, np.zeros(grid.m_shape), Mode.RELAXED)
        h = StrayField(grid, np.ones(grid.h_shape))
        with pytest.raises(ValueError):
            reflect_even(m, h, 0)

    def test_even_rejects_periodic_axis(self):
        grid = make_grid(d=1, n_h=8, n_v=4, bc="periodic")
        m = Magnetisation(grid, np.zeros(grid.m_shape), Mode.RELAXED)
        h = StrayField(grid, np.zeros(grid.h_shape))
        with pytest.raises(ValueError):
            reflect_even(m, h, 0)

    @pytest.mark.parametrize("d", [1, 2])
    def test_odd_zeroes_slice_means(self, d):
        grid = make_grid(d=d, n_h=8, n_v=4, bc="zero-flux")
        m = random_sharp(grid, seed=41)
        h = StrayField(grid, np.zeros(grid.h_shape))
        m2, _ = reflect_odd(m, h, 0)
        spatial = tuple(range(1, 1 + d))
        np.testing.assert_allclose(m2.values.mean(axis=spatial), 0.0, atol=1e-15)

    @pytest.mark.parametrize("d", [1, 2])
    def test_odd_seam_interfaces_counted(self, d):
        grid = make_grid(d=d, n_h=8, n_v=4, bc="zero-flux")
        m = random_sharp(grid, seed=43)
        h = StrayField(grid, np.zeros(grid.h_shape))
        m2, _ = reflect_odd(m, h, 0)
        i1 = energy.interfacial_energy(m)
        i2 = energy.interfacial_energy(m2)
        cross = (2 * grid.L[1]) if d == 2 else 1.0
        assert i2 == pytest.approx(2 * i1 + 4 * cross * grid.T, rel=1e-12)

    def test_odd_preserves_residual(self):
        m, h = admissible_pair(1, seed=47)
        m2, h2 = reflect_odd(m, h, 0)
        assert check_admissibility(m2, h2).passed

    def test_mirror_vertical_seam_identity(self):
        m, h = admissible_pair(1, seed=53, n_v=6)
        grid = m.grid
        m2, h2 = mirror_vertical(m, h)
        assert m2.grid.n_v == 12
        assert m2.grid.T == pytest.approx(2 * grid.T)
        res = vertical_charge(m2) + elliptic.divergence(
            h2.values, grid.dx, tuple(b.value for b in grid.bc)
        )
        seam = np.abs(res[grid.n_v - 1 : grid.n_v + 1])
        expect = np.abs(m.values[-1]) / m2.grid.dz
        np.testing.assert_allclose(seam[0], expect, atol=1e-10)
        np.testing.assert_allclose(seam[1], expect, atol=1e-10)
        away = np.delete(res, [grid.n_v - 1, grid.n_v], axis=0)
        np.testing.assert_allclose(away, 0.0, atol=1e-10)


class TestRescale:
    @pytest.mark.parametrize("d,ratio", [(1, 8.0 ** (-1.0)), (2, 8.0 ** (-5.0 / 3.0))])
    def test_energy_ratio(self, d, ratio):
        m, h = admissible_pair(d, seed=61)
        m2, h2 = anisotropic_rescale(m, h, lam=8.0)
        e1 = energy.total_energy(m, h)
        e2 = energy.total_energy(m2, h2)
        assert e2.interfacial == pytest.approx(ratio * e1.interfacial, rel=1e-12)
        assert e2.stray == pytest.approx(ratio * e1.stray, rel=1e-12)

    def test_residual_scales_linearly(self):
        grid = make_grid(d=1, n_h=8, n_v=4)
        values = np.zeros(grid.m_shape)
        values[2, 3] = 1.0
        m = Magnetisation(grid, values, Mode.RELAXED)
        h = StrayField(grid, np.zeros(grid.h_shape))
        r1 = check_admissibility(m, h).max_residual
        m2, h2 = anisotropic_rescale(m, h, lam=8.0)
        r2 = check_admissibility(m2, h2).max_residual
        assert r2 == pytest.approx(8.0 * r1, rel=1e-12)


class TestRestrict:
    def test_window_and_bc(self):
        grid = make_grid(d=2, n_h=16, n_v=8, L=2.0, T=1.0, bc="zero-flux")
        m = random_sharp(grid, seed=71)
        sub = SubCuboid(a=(0.0, 0.0), l=1.0, t=0.5, anchor=Anchor.BOTTOM)
        w = restrict(m, sub)
        assert w.grid.n_h == (8, 8)
        assert w.grid.n_v == 4
        assert w.grid.bc == (Bc.ZERO_FLUX, Bc.ZERO_FLUX)
        np.testing.assert_array_equal(w.values, m.values[:4, 4:12, 4:12])

    def test_full_width_keeps_bc(self):
        grid = make_grid(d=1, n_h=8, n_v=4, bc="periodic")
        h = StrayField(grid, np.arange(32, dtype=float).reshape(grid.h_shape))
        sub = SubCuboid(a=(0.0,), l=grid.L[0], t=grid.T, anchor=Anchor.TOP)
        w = restrict(h, sub)
        assert w.grid.bc == (Bc.PERIODIC,)
        np.testing.assert_array_equal(w.values, h.values)

    def test_out_of_range_raises(self):
        grid = make_grid(d=1, n_h=8, n_v=4)
        m = random_sharp(grid, seed=73)
        with pytest.raises(ValueError):
            restrict(m, SubCuboid(a=(0.9,), l=0.5, t=1.0))
