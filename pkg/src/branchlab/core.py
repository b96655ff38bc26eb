"""Grid geometry, field containers, admissibility, and exact symmetry ops.

Conventions used everywhere: slab ``[-L, L]^d x [0, T]`` discretised into
cells; magnetisation values live at cell centres in arrays of shape
``(n_v, n_1[, n_2])`` with the vertical slice index first and the bottom
slice at index 0.  Field components are stacked last; component ``a`` is the
flux through the facet on the high side of the cell along horizontal axis
``a``.  The vertical derivative uses centred differences with mirror ghosts
``m[-1] = 2 m_bottom - m[0]``, so zero boundary data means a weak (mean)
zero trace, and a boundary sheet of magnetisation costs stray field.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

from . import elliptic

__all__ = [
    "Bc",
    "Mode",
    "Anchor",
    "GridSpec",
    "Magnetisation",
    "StrayField",
    "SubCuboid",
    "SnappedBox",
    "AdmissibilityReport",
    "vertical_charge",
    "check_admissibility",
    "reflect_even",
    "reflect_odd",
    "mirror_vertical",
    "anisotropic_rescale",
    "restrict",
]


class Bc(str, enum.Enum):
    PERIODIC = "periodic"
    ZERO_FLUX = "zero-flux"


class Mode(str, enum.Enum):
    SHARP = "sharp"
    RELAXED = "relaxed"


class Anchor(str, enum.Enum):
    BOTTOM = "bottom"
    TOP = "top"


def _tuple_of(value, d: int, kind):
    if isinstance(value, (tuple, list)):
        items = tuple(kind(v) for v in value)
        if len(items) != d:
            raise ValueError(f"expected {d} per-axis entries, got {len(items)}")
        return items
    return (kind(value),) * d


@dataclass(frozen=True)
class GridSpec:
    """Cell counts and extents; scalar arguments broadcast over axes."""

    d: int
    n_h: tuple[int, ...]
    n_v: int
    L: tuple[float, ...]
    T: float
    bc: tuple[Bc, ...] = Bc.PERIODIC

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        object.__setattr__(self, "n_h", _tuple_of(self.n_h, self.d, int))
        object.__setattr__(self, "L", _tuple_of(self.L, self.d, float))
        object.__setattr__(self, "bc", _tuple_of(self.bc, self.d, Bc))
        if any(n < 1 for n in self.n_h) or self.n_v < 1:
            raise ValueError("cell counts must be positive")
        if any(l <= 0 for l in self.L) or self.T <= 0:
            raise ValueError("extents must be positive")

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple(2.0 * l / n for l, n in zip(self.L, self.n_h))

    @property
    def dz(self) -> float:
        return self.T / self.n_v

    @property
    def cell_area(self) -> float:
        return float(np.prod(self.dx))

    @property
    def cell_volume(self) -> float:
        return self.cell_area * self.dz

    @property
    def volume(self) -> float:
        return float(np.prod([2.0 * l for l in self.L])) * self.T

    @property
    def m_shape(self) -> tuple[int, ...]:
        return (self.n_v,) + self.n_h

    @property
    def h_shape(self) -> tuple[int, ...]:
        return self.m_shape + (self.d,)

    def replace(self, **kw) -> "GridSpec":
        return dataclasses.replace(self, **kw)

    def require_same(self, other: "GridSpec") -> None:
        if self != other:
            raise ValueError(f"grid mismatch: {self} vs {other}")


def _check_values(grid: GridSpec, values: np.ndarray, shape: tuple[int, ...], what: str):
    values = np.asarray(values)
    if values.shape != shape:
        raise ValueError(f"{what} shape {values.shape} does not match grid {shape}")
    if not np.issubdtype(values.dtype, np.floating):
        values = values.astype(np.float64)
    return values


@dataclass
class Magnetisation:
    grid: GridSpec
    values: np.ndarray
    mode: Mode = Mode.SHARP

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, self.grid.m_shape, "m")
        self.mode = Mode(self.mode)
        if self.mode is Mode.SHARP:
            if not np.all(np.abs(self.values) == 1.0):
                raise ValueError("sharp magnetisation must take values -1 or +1")
        elif np.max(np.abs(self.values), initial=0.0) > 1.0 + 1e-12:
            raise ValueError("relaxed magnetisation must stay within [-1, 1]")

    def copy(self) -> "Magnetisation":
        return Magnetisation(self.grid, self.values.copy(), self.mode)


@dataclass
class StrayField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, self.grid.h_shape, "h")

    def copy(self) -> "StrayField":
        return StrayField(self.grid, self.values.copy())


@dataclass(frozen=True)
class SubCuboid:
    """Horizontal box of half-width ``l`` about centre ``a``, height ``t``
    anchored at the bottom or top face of the slab."""

    a: tuple[float, ...]
    l: float
    t: float
    anchor: Anchor = Anchor.BOTTOM

    def __post_init__(self):
        a = self.a if isinstance(self.a, (tuple, list)) else (self.a,)
        object.__setattr__(self, "a", tuple(float(v) for v in a))
        object.__setattr__(self, "anchor", Anchor(self.anchor))
        if self.l <= 0 or self.t <= 0:
            raise ValueError("sub-box extents must be positive")

    def snap(self, grid: GridSpec) -> "SnappedBox":
        if len(self.a) != grid.d:
            raise ValueError("centre dimension does not match the grid")
        slices = []
        widths = []
        centres = []
        for ax in range(grid.d):
            dx = grid.dx[ax]
            fa = int(round((self.a[ax] + grid.L[ax]) / dx))
            w = max(1, int(round(self.l / dx)))
            lo, hi = fa - w, fa + w
            if lo < 0 or hi > grid.n_h[ax]:
                raise ValueError(
                    f"sub-box [{lo}, {hi}) exceeds axis {ax} with {grid.n_h[ax]} cells"
                )
            slices.append(slice(lo, hi))
            widths.append(w * dx)
            centres.append(-grid.L[ax] + fa * dx)
        p = min(max(1, int(round(self.t / grid.dz))), grid.n_v)
        if self.anchor is Anchor.BOTTOM:
            z = slice(0, p)
        else:
            z = slice(grid.n_v - p, grid.n_v)
        return SnappedBox(
            h_slices=tuple(slices),
            z_slice=z,
            l=tuple(widths),
            t=p * grid.dz,
            a=tuple(centres),
            anchor=self.anchor,
        )


@dataclass(frozen=True)
class SnappedBox:
    h_slices: tuple[slice, ...]
    z_slice: slice
    l: tuple[float, ...]
    t: float
    a: tuple[float, ...]
    anchor: Anchor


def vertical_charge(m: Magnetisation, m_bottom=None, m_top=None) -> np.ndarray:
    """Centred vertical derivative of ``m`` with mirror ghosts.

    ``m_bottom`` / ``m_top`` are boundary trace data (scalar or horizontal
    array, default zero); the returned array is the charge the horizontal
    field must balance, one value per cell.
    """
    v = m.values
    dz = m.grid.dz
    mb = np.zeros(v.shape[1:]) if m_bottom is None else np.broadcast_to(m_bottom, v.shape[1:])
    mt = np.zeros(v.shape[1:]) if m_top is None else np.broadcast_to(m_top, v.shape[1:])
    ghost_b = 2.0 * mb - v[0]
    ghost_t = 2.0 * mt - v[-1]
    ext = np.concatenate((ghost_b[None], v, ghost_t[None]), axis=0)
    return (ext[2:] - ext[:-2]) / (2.0 * dz)


@dataclass(frozen=True)
class AdmissibilityReport:
    max_residual: float
    slice_means: np.ndarray
    boundary_mean_misfit: tuple[float, float]
    passed: bool


def check_admissibility(
    m: Magnetisation,
    h: StrayField,
    *,
    tol: float = 1e-10,
    m_bottom=None,
    m_top=None,
    boundary_flux=None,
) -> AdmissibilityReport:
    """Pointwise residual of the flux-balance constraint.

    ``boundary_flux`` maps ``(axis, side)`` with side in ``{"low", "high"}``
    to prescribed outward fluxes of shape ``(n_v, cross-section)`` on
    zero-flux walls; without it walls are taken as impermeable.  The residual
    is absolute, in charge units.
    """
    m.grid.require_same(h.grid)
    grid = m.grid
    res = vertical_charge(m, m_bottom, m_top) + elliptic.divergence(
        h.values, grid.dx, tuple(b.value for b in grid.bc)
    )
    if boundary_flux:
        for (ax, side), g in boundary_flux.items():
            if grid.bc[ax] is not Bc.ZERO_FLUX:
                raise ValueError(f"axis {ax} has no wall to carry flux data")
            sp = 1 + ax
            g = np.asarray(g, dtype=np.float64)
            if side == "low":
                wall = [slice(None)] * res.ndim
                wall[sp] = 0
                res[tuple(wall)] += g / grid.dx[ax]
            elif side == "high":
                wall = [slice(None)] * res.ndim
                wall[sp] = grid.n_h[ax] - 1
                stored = h.values[tuple(wall) + (ax,)]
                res[tuple(wall)] += (g - stored) / grid.dx[ax]
            else:
                raise ValueError(f"unknown side {side!r}")
    spatial = tuple(range(1, 1 + grid.d))
    means = m.values.mean(axis=spatial)
    mb = 0.0 if m_bottom is None else float(np.mean(m_bottom))
    mt = 0.0 if m_top is None else float(np.mean(m_top))
    misfit = (abs(float(means[0]) - mb), abs(float(means[-1]) - mt))
    max_res = float(np.max(np.abs(res)))
    return AdmissibilityReport(max_res, means, misfit, max_res <= tol)


def _require_wall(grid: GridSpec, axis: int) -> None:
    if not 0 <= axis < grid.d:
        raise ValueError(f"axis {axis} out of range for d={grid.d}")
    if grid.bc[axis] is not Bc.ZERO_FLUX:
        raise ValueError("reflection needs a zero-flux axis")


def _reflected_grid(grid: GridSpec, axis: int) -> GridSpec:
    n_h = list(grid.n_h)
    L = list(grid.L)
    bc = list(grid.bc)
    n_h[axis] *= 2
    L[axis] *= 2.0
    bc[axis] = Bc.PERIODIC
    return grid.replace(n_h=tuple(n_h), L=tuple(L), bc=tuple(bc))


def _mirror_normal(comp: np.ndarray, sp: int, sign: float) -> np.ndarray:
    # Facet fluxes: drop the wall slot, mirror the rest, close with an exact
    # zero on the new wrap facet.
    n = comp.shape[sp]
    body = np.take(comp, np.arange(n - 1), axis=sp)
    image = sign * np.flip(body, axis=sp)
    zero = np.zeros_like(np.take(comp, [0], axis=sp))
    return np.concatenate((comp, image, zero), axis=sp)


def reflect_even(m: Magnetisation, h: StrayField, axis: int):
    """Even extension across the high wall of ``axis``; the doubled pair is
    periodic, has twice the energy, and gains no interfaces."""
    m.grid.require_same(h.grid)
    grid = m.grid
    _require_wall(grid, axis)
    sp = 1 + axis
    wall = np.take(h.values[..., axis], [-1], axis=sp)
    scale = max(1.0, float(np.max(np.abs(h.values))))
    if float(np.max(np.abs(wall))) > 1e-10 * scale:
        raise ValueError("even reflection needs zero flux through the wall")
    new_grid = _reflected_grid(grid, axis)
    mv = np.concatenate((m.values, np.flip(m.values, axis=sp)), axis=sp)
    comps = []
    for b in range(grid.d):
        comp = h.values[..., b]
        if b == axis:
            comps.append(_mirror_normal(comp, sp, -1.0))
        else:
            comps.append(np.concatenate((comp, np.flip(comp, axis=sp)), axis=sp))
    hv = np.stack(comps, axis=-1)
    return Magnetisation(new_grid, mv, m.mode), StrayField(new_grid, hv)


def reflect_odd(m: Magnetisation, h: StrayField, axis: int):
    """Odd extension across the high wall of ``axis``; slice means of the
    doubled magnetisation vanish exactly."""
    m.grid.require_same(h.grid)
    grid = m.grid
    _require_wall(grid, axis)
    sp = 1 + axis
    new_grid = _reflected_grid(grid, axis)
    mv = np.concatenate((m.values, -np.flip(m.values, axis=sp)), axis=sp)
    comps = []
    for b in range(grid.d):
        comp = h.values[..., b]
        if b == axis:
            comps.append(_mirror_normal(comp, sp, 1.0))
        else:
            comps.append(np.concatenate((comp, -np.flip(comp, axis=sp)), axis=sp))
    hv = np.stack(comps, axis=-1)
    return Magnetisation(new_grid, mv, m.mode), StrayField(new_grid, hv)


def mirror_vertical(m: Magnetisation, h: StrayField):
    """Mirror across the top face, doubling ``T``.

    The two slices at the seam keep a residual of size ``|m| / dz`` each:
    mirroring removes the boundary sheets the input field balanced, and no
    vertical stencil can absorb them without also freeing the outer faces.
    """
    m.grid.require_same(h.grid)
    grid = m.grid
    new_grid = grid.replace(n_v=2 * grid.n_v, T=2.0 * grid.T)
    mv = np.concatenate((m.values, np.flip(m.values, axis=0)), axis=0)
    hv = np.concatenate((h.values, -np.flip(h.values, axis=0)), axis=0)
    return Magnetisation(new_grid, mv, m.mode), StrayField(new_grid, hv)


def anisotropic_rescale(m: Magnetisation, h: StrayField, lam: float):
    """Rescale extents by ``(lam^{-2/3}, lam^{-1})`` and the field by
    ``lam^{1/3}``; cell arrays are untouched, so admissibility defects scale
    by exactly ``lam`` and energies by ``lam^{-(2d+1)/3}``."""
    m.grid.require_same(h.grid)
    if lam <= 0:
        raise ValueError("scale factor must be positive")
    grid = m.grid
    new_grid = grid.replace(
        L=tuple(l * lam ** (-2.0 / 3.0) for l in grid.L), T=grid.T / lam
    )
    return (
        Magnetisation(new_grid, m.values.copy(), m.mode),
        StrayField(new_grid, h.values * lam ** (1.0 / 3.0)),
    )


def restrict(field, sub: SubCuboid):
    """Window a field to a snapped sub-box; fluxes through the window
    boundary are retained on its wall facets."""
    grid = field.grid
    box = sub.snap(grid)
    window = (box.z_slice,) + box.h_slices
    bc = tuple(
        grid.bc[ax]
        if (box.h_slices[ax].start == 0 and box.h_slices[ax].stop == grid.n_h[ax])
        else Bc.ZERO_FLUX
        for ax in range(grid.d)
    )
    new_grid = GridSpec(
        d=grid.d,
        n_h=tuple(s.stop - s.start for s in box.h_slices),
        n_v=box.z_slice.stop - box.z_slice.start,
        L=tuple(w for w in box.l),
        T=box.t,
        bc=bc,
    )
    if isinstance(field, Magnetisation):
        return Magnetisation(new_grid, field.values[window].copy(), field.mode)
    if isinstance(field, StrayField):
        return StrayField(new_grid, field.values[window].copy())
    raise TypeError(f"cannot restrict {type(field).__name__}")
