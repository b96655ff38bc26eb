"""Wall-flux boundary data and the layer construction that absorbs it.

Prescribed lateral fluxes plus top/bottom traces determine a height-averaged
horizontal field (`solve_over_relaxed`).  The height-oscillating remainder of
the flux is swallowed inside a thin band of cells along the wall
(`boundary_layer`), producing an admissible relaxed pair
(`relaxed_competitor`) whose vertical derivative stays controlled.
"""

from dataclasses import dataclass, field

import numpy as np

from . import elliptic
from .core import Bc, GridSpec, Magnetisation, Mode, StrayField

__all__ = [
    "BoundaryData",
    "BoundaryLayerPair",
    "Plaquette",
    "boundary_layer",
    "generating_fields",
    "relaxed_competitor",
    "solve_over_relaxed",
]


def _bc_values(grid: GridSpec) -> tuple[str, ...]:
    return tuple(b.value for b in grid.bc)


def _wall_shape(grid: GridSpec, axis: int) -> tuple[int, ...]:
    if grid.d == 1:
        return (grid.n_v,)
    return (grid.n_v, grid.n_h[1 - axis])


def _facet_measure(grid: GridSpec, axis: int) -> float:
    return 1.0 if grid.d == 1 else grid.dx[1 - axis]


@dataclass
class BoundaryData:
    """Lateral outward fluxes ``g`` per wall plus top/bottom traces.

    ``g`` maps ``(axis, side)`` with side in ``{"low", "high"}`` to an array
    of shape ``(n_v,)`` for d=1 or ``(n_v, n_cross)`` for d=2; walls without
    an entry are impermeable.  Construction validates the bookkeeping
    identity: total outward flux equals the integral of ``m_bottom - m_top``.
    """

    grid: GridSpec
    m_bottom: np.ndarray
    m_top: np.ndarray
    g: dict[tuple[int, str], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        shape = self.grid.n_h
        self.m_bottom = np.broadcast_to(np.asarray(self.m_bottom, dtype=np.float64), shape).copy()
        self.m_top = np.broadcast_to(np.asarray(self.m_top, dtype=np.float64), shape).copy()
        for name, arr in (("m_bottom", self.m_bottom), ("m_top", self.m_top)):
            if np.max(np.abs(arr), initial=0.0) > 1.0 + 1e-12:
                raise ValueError(f"{name} must stay within [-1, 1]")
        clean = {}
        for (ax, side), arr in self.g.items():
            if not 0 <= ax < self.grid.d:
                raise ValueError(f"axis {ax} out of range for d={self.grid.d}")
            if self.grid.bc[ax] is not Bc.ZERO_FLUX:
                raise ValueError(f"axis {ax} has no wall to carry flux data")
            if side not in ("low", "high"):
                raise ValueError(f"unknown side {side!r}")
            arr = np.asarray(arr, dtype=np.float64)
            want = _wall_shape(self.grid, ax)
            if arr.shape != want:
                raise ValueError(f"g[{ax},{side}] shape {arr.shape}, expected {want}")
            clean[(ax, side)] = arr.copy()
        self.g = clean
        total = sum(
            float(np.sum(arr)) * _facet_measure(self.grid, ax) * self.grid.dz
            for (ax, _), arr in self.g.items()
        )
        target = float(np.sum(self.m_bottom - self.m_top)) * self.grid.cell_area
        scale = max(1.0, abs(total), abs(target))
        if abs(total - target) > 1e-8 * scale:
            raise ValueError(
                f"incompatible boundary data: wall flux {total:.3e} vs trace imbalance {target:.3e}"
            )

    @classmethod
    def zero(cls, grid: GridSpec) -> "BoundaryData":
        return cls(grid, np.zeros(grid.n_h), np.zeros(grid.n_h), {})

    def gbar(self, axis: int, side: str) -> np.ndarray:
        """Height average of the wall flux; zeros for an absent entry."""
        arr = self.g.get((axis, side))
        if arr is None:
            shape = _wall_shape(self.grid, axis)[1:]
            return np.zeros(shape)
        return arr.mean(axis=0)

    def oscillations(self) -> dict[tuple[int, str], np.ndarray]:
        """Per wall: ``g`` minus its height average, with the last slice
        adjusted so every wall point sums to zero over the height."""
        out = {}
        for key, arr in self.g.items():
            f = arr - arr.mean(axis=0)
            f[-1] = -np.sum(f[:-1], axis=0)
            out[key] = f
        return out


def _fold_wall(rhs: np.ndarray, grid: GridSpec, axis: int, side: str, data) -> None:
    # Neumann data enters the zero-flux solve as a surface source on the
    # wall cells; `data` broadcasts over the cross axis.
    idx = [slice(None)] * rhs.ndim
    pos = axis if rhs.ndim == grid.d else rhs.ndim - grid.d + axis
    idx[pos] = 0 if side == "low" else grid.n_h[axis] - 1
    rhs[tuple(idx)] -= np.asarray(data) / grid.dx[axis]


def _overwrite_high_wall(values: np.ndarray, grid: GridSpec, axis: int, data) -> None:
    idx = [slice(None)] * (values.ndim - 1)
    pos = values.ndim - 1 - grid.d + axis
    idx[pos] = grid.n_h[axis] - 1
    values[tuple(idx) + (axis,)] = data


def _project_mean(rho: np.ndarray, what: str, tol: float = 1e-8) -> np.ndarray:
    mean = float(rho.mean())
    scale = max(1.0, float(np.max(np.abs(rho), initial=0.0)))
    if abs(mean) > tol * scale:
        raise ValueError(f"{what}: source mean {mean:.3e} is incompatible")
    return rho - mean


def solve_over_relaxed(bd: BoundaryData, grid: GridSpec | None = None):
    """Height-independent potential and field matching the averaged data.

    Returns ``(v0, hbar)``: the zero-mean horizontal potential and the field
    ``-grad v0`` tiled over all slices, with stored high-wall slots carrying
    the averaged wall flux.  Its energy is ``field_energy(hbar)``.
    """
    if grid is None:
        grid = bd.grid
    bd.grid.require_same(grid)
    bc = _bc_values(grid)
    rhs = (bd.m_bottom - bd.m_top) / grid.T
    rhs = rhs.copy()
    for ax in range(grid.d):
        for side in ("low", "high"):
            if (ax, side) in bd.g:
                _fold_wall(rhs, grid, ax, side, bd.gbar(ax, side))
    rhs = _project_mean(rhs, "over-relaxed data")
    v0 = elliptic.solve_poisson(rhs, grid.dx, bc)
    slab = -elliptic.gradient(v0, grid.dx, bc)
    for ax in range(grid.d):
        if (ax, "high") in bd.g:
            _overwrite_high_wall(slab, grid, ax, bd.gbar(ax, "high"))
    hbar = np.broadcast_to(slab, grid.h_shape).copy()
    return v0, StrayField(grid, hbar)


def generating_fields(bd: BoundaryData, grid: GridSpec | None = None):
    """Horizontal fields whose divergence balances the top/bottom traces.

    The full averaged wall flux (times ``T``) rides on the top field, so the
    difference of the two carries exactly the cumulated wall data; trace
    means are projected out, since a mean sources no horizontal field.
    """
    if grid is None:
        grid = bd.grid
    bd.grid.require_same(grid)
    bc = _bc_values(grid)

    def solve(trace: np.ndarray, with_data: bool) -> np.ndarray:
        rhs = -(trace - trace.mean())
        if with_data:
            rhs = rhs.copy()
            for ax in range(grid.d):
                for side in ("low", "high"):
                    if (ax, side) in bd.g:
                        _fold_wall(rhs, grid, ax, side, grid.T * bd.gbar(ax, side))
        rhs = _project_mean(rhs, "generating-field data")
        u = elliptic.solve_poisson(rhs, grid.dx, bc)
        out = -elliptic.gradient(u, grid.dx, bc)
        if with_data:
            for ax in range(grid.d):
                if (ax, "high") in bd.g:
                    _overwrite_high_wall(out, grid, ax, grid.T * bd.gbar(ax, "high"))
        return out

    return solve(bd.m_bottom, False), solve(bd.m_top, True)


@dataclass(frozen=True)
class Plaquette:
    """One tile of the wall band: a cell window plus the wall facets it owns.

    ``walls`` lists ``(axis, side, cross_slice)`` entries indexing into the
    matching boundary array; corner tiles own both of their wall runs.
    """

    cells: tuple[slice, ...]
    walls: tuple[tuple[int, str, slice], ...]


def _tile_layer(grid: GridSpec, w: tuple[int, ...]) -> tuple[Plaquette, ...]:
    walled = [ax for ax in range(grid.d) if grid.bc[ax] is Bc.ZERO_FLUX]
    if not walled:
        return ()
    if grid.d == 1:
        n = grid.n_h[0]
        return (
            Plaquette((slice(0, w[0]),), ((0, "low", slice(None)),)),
            Plaquette((slice(n - w[0], n),), ((0, "high", slice(None)),)),
        )
    tiles = []
    for ax in walled:
        cross = 1 - ax
        span_lo, span_hi = 0, grid.n_h[cross]
        if ax == 1 and 0 in walled:
            # Corner tiles belong to the axis-0 faces.
            span_lo, span_hi = w[0], grid.n_h[0] - w[0]
        span = span_hi - span_lo
        if span % w[cross] != 0:
            raise ValueError(
                f"layer tiles of {w[cross]} cells do not fit the {span}-cell run on axis {ax}"
            )
        for side in ("low", "high"):
            band = slice(0, w[ax]) if side == "low" else slice(grid.n_h[ax] - w[ax], grid.n_h[ax])
            for j in range(span // w[cross]):
                run = slice(span_lo + j * w[cross], span_lo + (j + 1) * w[cross])
                cells = [None, None]
                cells[ax] = band
                cells[cross] = run
                walls = [(ax, side, run)]
                if ax == 0 and 1 in walled:
                    if run.start == 0:
                        walls.append((1, "low", band))
                    if run.stop == grid.n_h[1]:
                        walls.append((1, "high", band))
                tiles.append(Plaquette(tuple(cells), tuple(walls)))
    return tuple(tiles)


@dataclass
class BoundaryLayerPair:
    """Wall-band magnetisation and field absorbing the flux oscillation.

    ``lam`` has one row per plaquette and ``n_v + 2`` columns: interior slice
    values framed by the exact zero endpoint values.  ``field_ratio`` and
    ``charge_ratio`` are the measured constants of the two layer estimates
    (field energy, and height-integrated sup of the vertical derivative,
    each against the oscillation strength).
    """

    grid: GridSpec
    r: float
    m_r: Magnetisation
    h_r: StrayField
    h1: StrayField
    h2: StrayField
    lam: np.ndarray
    mbar: np.ndarray
    m0_avg: np.ndarray
    plaquettes: tuple[Plaquette, ...]
    field_ratio: float
    charge_ratio: float


def _linear_profile(bd: BoundaryData) -> np.ndarray:
    grid = bd.grid
    z = (np.arange(grid.n_v) + 0.5) * grid.dz / grid.T
    shape = (grid.n_v,) + (1,) * grid.d
    z = z.reshape(shape)
    return (1.0 - z) * bd.m_bottom[None] + z * bd.m_top[None]


def _oscillation_strength(bd: BoundaryData) -> float:
    total = 0.0
    count = 0
    for (ax, _), arr in bd.oscillations().items():
        total += float(np.sum(arr * arr))
        count += arr.size
    return total / count if count else 0.0


def layer_size_threshold(bd: BoundaryData, c_size: float = 1.0) -> float:
    """Smallest admissible ``r`` for the wall band, in length units."""
    grid = bd.grid
    lmin = min(grid.L)
    avg_f2 = _oscillation_strength(bd)
    h_b, h_t = generating_fields(bd)
    sup_b = float(np.max(np.linalg.norm(h_b, axis=-1), initial=0.0))
    sup_cum = float(np.max(np.linalg.norm(h_t - h_b, axis=-1), initial=0.0))
    # The cumulated-field term uses the height average (H^T - H^B)/T, so the
    # T factors cancel.
    t1 = ((grid.T / lmin) ** 2 * avg_f2) ** (1.0 / (grid.d + 1))
    t2 = sup_cum / lmin
    t3 = sup_b / lmin
    return c_size * max(t1, t2, t3) * lmin


def boundary_layer(
    bd: BoundaryData,
    r: float,
    grid: GridSpec | None = None,
    *,
    c_size: float = 1.0,
) -> BoundaryLayerPair:
    """Absorb the non-averaged wall flux in a band of width ``r``.

    Per wall tile and slice, the cumulated oscillation flux is matched by a
    magnetisation of the form ``lam * (sign - profile)`` and two fields: one
    divergence-free carrying the within-tile oscillation, one balancing the
    band's vertical charge.  Raises ``ValueError`` when the band is too thin
    for the ``lam <= 1/2`` guarantee or does not tile the wall run.
    """
    if grid is None:
        grid = bd.grid
    bd.grid.require_same(grid)
    walled = [ax for ax in range(grid.d) if grid.bc[ax] is Bc.ZERO_FLUX]
    m_vals = np.zeros(grid.m_shape)
    h1_vals = np.zeros(grid.h_shape)
    h2_vals = np.zeros(grid.h_shape)
    if not walled:
        empty = np.zeros((0, grid.n_v))
        return BoundaryLayerPair(
            grid, r, Magnetisation(grid, m_vals, Mode.RELAXED), StrayField(grid, h1_vals + h2_vals),
            StrayField(grid, h1_vals), StrayField(grid, h2_vals),
            np.zeros((0, grid.n_v + 2)), empty, empty, (), 0.0, 0.0,
        )
    w = []
    for ax in range(grid.d):
        cells = int(round(r / grid.dx[ax]))
        if abs(cells * grid.dx[ax] - r) > 1e-9 * max(1.0, r):
            raise ValueError(f"layer width {r} is not a whole number of cells on axis {ax}")
        w.append(cells)
    w = tuple(w)
    for ax in walled:
        if w[ax] < 1 or 2 * w[ax] >= grid.n_h[ax]:
            raise ValueError(f"layer width {w[ax]} cells does not fit axis {ax}")
    rmin = layer_size_threshold(bd, c_size)
    if r < rmin - 1e-12:
        raise ValueError(f"layer width {r:.4g} below the admissible minimum {rmin:.4g}")
    tiles = _tile_layer(grid, w)
    f_osc = bd.oscillations()
    profile = _linear_profile(bd)
    bc_local = ("zero-flux",) * grid.d
    dz = grid.dz
    n_plq = len(tiles)
    lam = np.zeros((n_plq, grid.n_v + 2))
    mbar = np.zeros((n_plq, grid.n_v))
    m0_avg = np.zeros((n_plq, grid.n_v))
    sq_sup = np.zeros(grid.n_v)
    for pi, tile in enumerate(tiles):
        cell_idx = (slice(None),) + tile.cells
        area = float(np.prod([s.stop - s.start for s in tile.cells])) * grid.cell_area
        wall_measure = 0.0
        flux = np.zeros(grid.n_v)
        for ax, side, run in tile.walls:
            fw = f_osc.get((ax, side))
            measure = _facet_measure(grid, ax)
            wall_measure += measure * (1 if grid.d == 1 else run.stop - run.start)
            if fw is not None:
                part = fw if grid.d == 1 else fw[:, run]
                flux += part.reshape(grid.n_v, -1).sum(axis=1) * measure
        # Plaquette-integrated magnetisation from the centred-difference
        # recurrence; mirrored ghosts give exact zero traces.
        s_val = np.zeros(grid.n_v)
        s_val[0] = -0.5 * dz * flux[0]
        if grid.n_v > 1:
            s_val[1] = -s_val[0] - 2.0 * dz * flux[0]
        for j in range(1, grid.n_v - 1):
            s_val[j + 1] = s_val[j - 1] - 2.0 * dz * flux[j]
        sign = np.where(s_val >= 0.0, 1.0, -1.0)
        avg0 = profile[cell_idx].reshape(grid.n_v, -1).mean(axis=1)
        lam_j = s_val / (area * (sign - avg0))
        lam[pi, 1:-1] = lam_j
        mbar[pi] = sign
        m0_avg[pi] = avg0
        if np.max(lam_j) > 0.5 + 1e-9 or np.min(lam_j) < -1e-12:
            raise ValueError(
                f"layer magnetisation weight {np.max(lam_j):.3f} leaves [0, 1/2]; widen the band"
            )
        shape_h = (grid.n_v,) + (1,) * grid.d
        m_tile = lam_j.reshape(shape_h) * (sign.reshape(shape_h) - profile[cell_idx])
        m_vals[cell_idx] = m_tile
        # Vertical charge of the tile, mirrored to zero traces.
        ghost_b = -m_tile[0]
        ghost_t = -m_tile[-1]
        ext = np.concatenate((ghost_b[None], m_tile, ghost_t[None]), axis=0)
        charge = (ext[2:] - ext[:-2]) / (2.0 * dz)
        sup = np.max(np.abs(charge.reshape(grid.n_v, -1)), axis=1)
        np.maximum(sq_sup, sup, out=sq_sup)
        dxs = tuple(grid.dx)
        fbar = flux / wall_measure
        rhs2 = -charge.copy()
        rhs1 = np.zeros_like(charge)
        have_osc = False
        for ax, side, run in tile.walls:
            fw = f_osc.get((ax, side))
            local = [slice(None)] * (grid.d + 1)
            local[1 + ax] = 0 if side == "low" else -1
            if grid.d == 1:
                rhs2[tuple(local)] -= fbar / dxs[ax]
                continue
            rhs2[tuple(local)] -= fbar[:, None] / dxs[ax]
            osc = (np.zeros((grid.n_v, run.stop - run.start)) if fw is None else fw[:, run]) - fbar[:, None]
            rhs1[tuple(local)] -= osc / dxs[ax]
            if np.any(osc):
                have_osc = True
        u2 = elliptic.solve_poisson(rhs2, dxs, bc_local)
        h2_tile = -elliptic.gradient(u2, dxs, bc_local)
        h2_vals[cell_idx] = h2_tile
        if have_osc:
            u1 = elliptic.solve_poisson(rhs1, dxs, bc_local)
            h1_vals[cell_idx] = -elliptic.gradient(u1, dxs, bc_local)
        for ax, side, run in tile.walls:
            if side != "high":
                continue
            fw = f_osc.get((ax, side))
            wall = [slice(None)] + list(tile.cells)
            wall[1 + ax] = grid.n_h[ax] - 1
            if grid.d == 1:
                h2_vals[tuple(wall) + (ax,)] = fbar
            else:
                h2_vals[tuple(wall) + (ax,)] = fbar[:, None]
                osc = (np.zeros((grid.n_v, run.stop - run.start)) if fw is None else fw[:, run]) - fbar[:, None]
                h1_vals[tuple(wall) + (ax,)] = osc
    h_r = h1_vals + h2_vals
    lmin = min(grid.L)
    avg_f2 = _oscillation_strength(bd)
    field_ratio = 0.0
    charge_ratio = 0.0
    if avg_f2 > 0.0:
        mean_sq = float(np.sum(h_r * h_r)) * grid.cell_volume / grid.volume
        field_ratio = mean_sq / ((r / lmin) * avg_f2)
        strength = grid.T * float(np.sum(sq_sup * sq_sup)) * dz
        charge_ratio = strength / (
            (r / lmin) ** (-(grid.d + 1)) * (grid.T / lmin) ** 2 * avg_f2
        )
    return BoundaryLayerPair(
        grid,
        r,
        Magnetisation(grid, m_vals, Mode.RELAXED),
        StrayField(grid, h_r),
        StrayField(grid, h1_vals),
        StrayField(grid, h2_vals),
        lam,
        mbar,
        m0_avg,
        tiles,
        field_ratio,
        charge_ratio,
    )


def relaxed_competitor(
    bd: BoundaryData,
    grid: GridSpec | None = None,
    r: float | None = None,
    *,
    c_size: float = 1.0,
):
    """Admissible relaxed pair for the given boundary data.

    The magnetisation interpolates the traces linearly and adds the wall
    band; the field is the averaged solve plus the band fields.  ``r``
    defaults to the smallest band width the size rule and the cell layout
    allow.
    """
    if grid is None:
        grid = bd.grid
    bd.grid.require_same(grid)
    if r is None:
        r = _default_width(bd, grid, c_size)
    v0, hbar = solve_over_relaxed(bd, grid)
    layer = boundary_layer(bd, r, grid, c_size=c_size)
    m_vals = _linear_profile(bd) + layer.m_r.values
    h_vals = hbar.values + layer.h_r.values
    if np.max(np.abs(m_vals)) > 1.0 + 1e-9:
        raise ValueError("relaxed competitor left [-1, 1]; boundary data inconsistent")
    m_rel = Magnetisation(grid, np.clip(m_vals, -1.0, 1.0), Mode.RELAXED)
    return m_rel, StrayField(grid, h_vals)


def _default_width(bd: BoundaryData, grid: GridSpec, c_size: float) -> float:
    walled = [ax for ax in range(grid.d) if grid.bc[ax] is Bc.ZERO_FLUX]
    if not walled:
        return 0.0
    rmin = layer_size_threshold(bd, c_size)
    dxs = [grid.dx[ax] for ax in walled]
    if len(set(dxs)) > 1:
        raise ValueError("anisotropic cells need an explicit layer width")
    step = dxs[0]
    cells = max(1, int(np.ceil(rmin / step - 1e-12)))
    limit = min(grid.n_h[ax] for ax in walled)
    while 2 * cells < limit:
        try:
            boundary_layer(bd, cells * step, grid, c_size=c_size)
            return cells * step
        except ValueError:
            cells += 1
    raise ValueError("no admissible layer width fits the grid")
