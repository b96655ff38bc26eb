"""Interfacial and stray-field energies, slab averages, local statistics.

The stray field attached to a magnetisation is always the minimal one: each
horizontal slice carries a Poisson solve for the potential whose negative
gradient balances the vertical charge.  Solves are batched over slices and
optionally spread over a thread pool; results are assembled in slice order,
so the output is identical for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import elliptic
from .core import Anchor, GridSpec, Magnetisation, StrayField, SubCuboid, vertical_charge
from .errors import NumericalCheckError

__all__ = [
    "EnergyBreakdown",
    "LocalStats",
    "interfacial_energy",
    "minimal_stray_field",
    "stray_energy_minimal",
    "field_energy",
    "total_energy",
    "height_average",
    "orthogonality_gap",
    "local_stats",
    "monotonicity_profile",
    "good_width",
]

_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class EnergyBreakdown:
    interfacial: float
    stray: float
    sigma: float
    total: float
    density: float


@dataclass(frozen=True)
class LocalStats:
    l: float
    t: float
    a: tuple[float, ...]
    anchor: Anchor
    f: float
    f0: float
    n: float
    e: float


def _bc_values(grid: GridSpec) -> tuple[str, ...]:
    return tuple(b.value for b in grid.bc)


def interfacial_energy(m: Magnetisation, sub: SubCuboid | None = None) -> float:
    """Area of the jump set weighted by jump size, without surface tension.

    Facets between horizontal neighbours contribute ``|jump| * facet area``;
    the wrap facet counts only on periodic axes spanned fully by the window.
    """
    grid = m.grid
    if sub is None:
        v = m.values
        full = (True,) * grid.d
    else:
        box = sub.snap(grid)
        v = m.values[(box.z_slice,) + box.h_slices]
        full = tuple(
            s.start == 0 and s.stop == grid.n_h[ax] for ax, s in enumerate(box.h_slices)
        )
    total = 0.0
    for ax in range(grid.d):
        sp = 1 + ax
        facet = grid.cell_area / grid.dx[ax] * grid.dz
        jumps = np.abs(np.diff(v, axis=sp)).sum()
        if full[ax] and grid.bc[ax].value == "periodic":
            jumps += np.abs(np.take(v, 0, axis=sp) - np.take(v, -1, axis=sp)).sum()
        total += float(jumps) * facet
    return total


def _slice_chunks(n_v: int, cells_per_slice: int) -> list[slice]:
    step = max(1, _CHUNK_CELLS // max(1, cells_per_slice))
    return [slice(j, min(j + step, n_v)) for j in range(0, n_v, step)]


def minimal_stray_field(
    m: Magnetisation,
    m_bottom=None,
    m_top=None,
    *,
    threads: int | None = None,
) -> StrayField:
    """Horizontal field of least energy balancing the vertical charge of
    ``m``; raises ``ValueError`` when a slice mean makes that impossible."""
    grid = m.grid
    bc = _bc_values(grid)
    charge = vertical_charge(m, m_bottom, m_top)
    out = np.empty(grid.h_shape)

    def solve(sl: slice) -> None:
        u = elliptic.solve_poisson(-charge[sl], grid.dx, bc)
        out[sl] = -elliptic.gradient(u, grid.dx, bc)

    chunks = _slice_chunks(grid.n_v, int(np.prod(grid.n_h)))
    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(solve, chunks))
    else:
        for sl in chunks:
            solve(sl)
    return StrayField(grid, out)


def stray_energy_minimal(
    m: Magnetisation,
    m_bottom=None,
    m_top=None,
    *,
    threads: int | None = None,
) -> float:
    """``1/2 integral |h|^2`` for the minimal field, slice by slice, without
    materialising the field."""
    grid = m.grid
    bc = _bc_values(grid)
    charge = vertical_charge(m, m_bottom, m_top)
    chunks = _slice_chunks(grid.n_v, int(np.prod(grid.n_h)))

    def norm(sl: slice) -> float:
        val = elliptic.inv_grad_sq_norm(charge[sl], grid.dx, bc)
        return float(np.sum(val))

    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(norm, chunks))
    else:
        parts = [norm(sl) for sl in chunks]
    return 0.5 * grid.dz * float(sum(parts))


def field_energy(h: StrayField, sub: SubCuboid | None = None) -> float:
    """``1/2 integral |h|^2`` of a stored field, optionally over a sub-box."""
    v = h.values
    if sub is not None:
        box = sub.snap(h.grid)
        v = v[(box.z_slice,) + box.h_slices]
    return 0.5 * float(np.sum(v * v)) * h.grid.cell_volume


def total_energy(
    m: Magnetisation,
    h: StrayField | None = None,
    sigma: float = 1.0,
    *,
    m_bottom=None,
    m_top=None,
    threads: int | None = None,
) -> EnergyBreakdown:
    """Energy of ``m`` with its minimal field, or of the given pair."""
    interfacial = interfacial_energy(m)
    if h is None:
        stray = stray_energy_minimal(m, m_bottom, m_top, threads=threads)
    else:
        m.grid.require_same(h.grid)
        stray = field_energy(h)
    total = sigma * interfacial + stray
    return EnergyBreakdown(interfacial, stray, sigma, total, total / m.grid.volume)


def height_average(
    h: StrayField,
    n_slices: int | None = None,
    anchor: Anchor = Anchor.BOTTOM,
) -> np.ndarray:
    """Mean of the field over the lowest (or highest) ``n_slices`` slices."""
    p = h.grid.n_v if n_slices is None else n_slices
    if not 1 <= p <= h.grid.n_v:
        raise ValueError(f"slice count {p} out of range")
    window = h.values[:p] if Anchor(anchor) is Anchor.BOTTOM else h.values[-p:]
    return window.mean(axis=0)


def orthogonality_gap(
    h: StrayField,
    n_slices: int | None = None,
    anchor: Anchor = Anchor.BOTTOM,
) -> float:
    """Defect of the exact split ``E[h] = E[h - hbar] + E[hbar]`` over the
    averaged slab; zero to rounding for any field."""
    grid = h.grid
    p = grid.n_v if n_slices is None else n_slices
    window = h.values[:p] if Anchor(anchor) is Anchor.BOTTOM else h.values[-p:]
    hbar = window.mean(axis=0)
    lhs = 0.5 * float(np.sum((window - hbar) ** 2)) * grid.cell_volume
    rhs = (
        0.5 * float(np.sum(window**2)) * grid.cell_volume
        - 0.5 * float(np.sum(hbar**2)) * grid.cell_area * p * grid.dz
    )
    return abs(lhs - rhs)


def local_stats(m: Magnetisation, h: StrayField, sub: SubCuboid) -> LocalStats:
    """Tilt-excess style statistics of the pair in an anchored sub-box.

    ``f`` measures interfacial density plus the energy of the field with its
    slab average removed, ``f0`` keeps the full field, ``n`` is the largest
    column flux through the box, and ``e`` the plain energy density at unit
    surface tension.  All are scaled as densities; ``f`` and ``f0`` carry the
    aspect factor ``t^2 / l^2``.
    """
    m.grid.require_same(h.grid)
    grid = m.grid
    box = sub.snap(grid)
    window = (box.z_slice,) + box.h_slices
    hv = h.values[window]
    l = box.l[0]
    t = box.t
    p = hv.shape[0]
    vol = float(np.prod([2.0 * w for w in box.l])) * t
    inter = interfacial_energy(m, sub)
    hbar = hv.mean(axis=0)
    avg_sq_rel = float(np.mean(np.sum((hv - hbar) ** 2, axis=-1)))
    avg_sq = float(np.mean(np.sum(hv**2, axis=-1)))
    aspect = t * t / (l * l)
    f = aspect * (inter / vol + 0.5 * avg_sq_rel)
    f0 = aspect * (inter / vol + 0.5 * avg_sq)
    column = np.abs(hv.sum(axis=0)) * grid.dz
    n = float(np.max(column)) / l
    e = (inter + 0.5 * avg_sq * vol) / vol
    return LocalStats(l, t, box.a, box.anchor, f, f0, n, e)


def monotonicity_profile(h: StrayField, l: float | None = None) -> np.ndarray:
    """``p -> (t_p^2 / l^2) avg |h - hbar_p|^2`` over the bottom slab of
    ``p`` slices; non-decreasing in exact arithmetic for every field."""
    grid = h.grid
    if l is None:
        l = grid.L[0]
    v = h.values
    ncells = float(np.prod(v.shape[1:]))
    sq = np.cumsum(np.sum(v.reshape(grid.n_v, -1) ** 2, axis=1))
    run = np.cumsum(v, axis=0)
    frob = np.sum(run.reshape(grid.n_v, -1) ** 2, axis=1)
    p = np.arange(1, grid.n_v + 1, dtype=np.float64)
    avg = (sq - frob / p) / (p * ncells)
    t = p * grid.dz
    return (t * t) / (l * l) * avg


def good_width(
    h: StrayField,
    lo: float,
    hi: float,
    *,
    A: float = 4.0,
    n_slices: int | None = None,
) -> float:
    """Smallest ring half-width in ``[lo, hi]`` whose boundary trace of the
    normal component is no worse than ``2^d A`` times the bulk average.

    Rings are square cell layers about the domain centre; a corner cell
    contributes once per touching side.  Cell counts must be even and cells
    isotropic.  For ``A > 1`` and ``hi >= 2 lo`` a ring always exists; if
    none qualifies a ``NumericalCheckError`` is raised.
    """
    grid = h.grid
    if any(n % 2 for n in grid.n_h):
        raise ValueError("ring search needs even cell counts")
    dx = grid.dx[0]
    p = grid.n_v if n_slices is None else n_slices
    v = h.values[:p]
    k_lo = max(1, int(np.ceil(lo / dx - 1e-12)))
    k_hi = min(min(grid.n_h) // 2, int(np.floor(hi / dx + 1e-12)))
    if k_lo > k_hi:
        raise ValueError("no candidate ring widths in range")
    layers = []
    for ax in range(grid.d):
        idx = np.abs(np.arange(grid.n_h[ax]) - (grid.n_h[ax] / 2.0 - 0.5)) + 0.5
        shape = [1] * grid.d
        shape[ax] = -1
        layers.append(idx.reshape(shape))
    layer = np.maximum.reduce(np.broadcast_arrays(*layers)) if grid.d > 1 else layers[0]
    bulk_mask = layer <= k_hi
    bulk = float(np.mean(np.sum(v[:, bulk_mask, ...] ** 2, axis=-1)))
    for k in range(k_lo, k_hi + 1):
        num = 0.0
        count = 0
        for ax in range(grid.d):
            mask = np.broadcast_to(layers[ax] == float(k), layer.shape) & (layer == k)
            vals = v[:, mask, ax]
            num += float(np.sum(vals * vals))
            count += vals.size
        trace = num / count
        if trace <= (2.0**grid.d) * A * bulk:
            return k * dx
    raise NumericalCheckError("no ring width passed the trace test")
