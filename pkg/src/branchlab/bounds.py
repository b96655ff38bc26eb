"""Interpolation lower bound, stripe baseline, scaling sweeps, decay probes.

The lower bound runs slice by slice: variation to the two-thirds, screened
norm to the one-third, summed with the slice height.  Zero-flux axes are
evaluated through their even periodic double (no wall jumps, exact factor
two per axis) and normalised back, so every reported value compares with
the energy of the pair on its own grid.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import elliptic
from .construction import assemble_branching, choose_N
from .core import (
    Anchor,
    Bc,
    GridSpec,
    Magnetisation,
    Mode,
    StrayField,
    SubCuboid,
    check_admissibility,
)
from .energy import _CHUNK_CELLS, EnergyBreakdown, LocalStats, local_stats, total_energy
from .errors import NumericalCheckError

__all__ = [
    "C_INTERP",
    "C_YOUNG",
    "SweepRow",
    "SweepResult",
    "StripeBaseline",
    "ProbeResult",
    "interpolation_ratio",
    "lower_bound_chain",
    "stripe_baseline",
    "scaling_sweep",
    "local_probe",
    "write_sweep_csv",
    "write_probe_csv",
]

# Largest interpolation ratio seen over the audit corpus (stripes, block
# patterns, seeded random signs); a recorded measurement, not a proof.  The
# corpus supremum is the wide square wave, whose closed-form limit is
# 12^{1/4}/sqrt(2) ~ 1.31607.
C_INTERP = 1.3161

# Weight of the interfacial term in the two-thirds/one-third split bounding
# the chain by the energy; valid for surface tension >= 1.
C_YOUNG = 2.0 / 3.0


def _axis_dx(u: np.ndarray, dx, d: int) -> tuple[float, ...]:
    if isinstance(dx, (tuple, list)):
        if len(dx) != d:
            raise ValueError(f"expected {d} spacings, got {len(dx)}")
        return tuple(float(v) for v in dx)
    return (float(dx),) * d


def _slice_variation(vals: np.ndarray, dx: tuple[float, ...], wrap: tuple[bool, ...]) -> np.ndarray:
    """Horizontal variation of each leading-axis slice; jump size times facet
    area, wrap facet only where asked."""
    d = len(dx)
    cell = float(np.prod(dx))
    spatial = tuple(range(vals.ndim - d, vals.ndim))
    out = 0.0
    for a, sp in enumerate(spatial):
        jumps = np.abs(np.diff(vals, axis=sp)).sum(axis=spatial)
        if wrap[a]:
            jumps = jumps + np.abs(
                np.take(vals, 0, axis=sp) - np.take(vals, -1, axis=sp)
            ).sum(axis=tuple(range(vals.ndim - d, vals.ndim - 1)))
        out = out + jumps * (cell / dx[a])
    return np.asarray(out, dtype=np.float64)


def interpolation_ratio(u: np.ndarray, dx) -> float:
    """``||u||_{4/3} / (||grad u||_1^{1/2} |||grad|^{-1} u||_2^{1/2})`` for a
    zero-mean horizontal field on the periodic cell; zero input returns 0."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim not in (1, 2):
        raise ValueError(f"horizontal field must be 1- or 2-d, got shape {u.shape}")
    dxs = _axis_dx(u, dx, u.ndim)
    if not np.any(u):
        return 0.0
    cell = float(np.prod(dxs))
    norm43 = float(np.sum(np.abs(u) ** (4.0 / 3.0)) * cell) ** 0.75
    variation = float(_slice_variation(u[None], dxs, (True,) * u.ndim)[0])
    screened = float(elliptic.inv_grad_sq_norm(u, dxs, ("periodic",) * u.ndim))
    return norm43 / (math.sqrt(variation) * screened**0.25)


def _chunked_screened_norms(vals: np.ndarray, grid: GridSpec) -> np.ndarray:
    bc = tuple(b.value for b in grid.bc)
    cells = int(np.prod(grid.n_h)) * 2 ** sum(b is Bc.ZERO_FLUX for b in grid.bc)
    step = max(1, _CHUNK_CELLS // cells)
    parts = [
        elliptic.inv_grad_sq_norm(vals[j : j + step], grid.dx, bc)
        for j in range(0, vals.shape[0], step)
    ]
    return np.concatenate([np.atleast_1d(p) for p in parts])


def lower_bound_chain(m: Magnetisation, h: StrayField) -> float:
    """Slice-summed interpolation bound on the energy of an admissible pair
    with zero boundary traces.

    Each slice contributes its height times variation^{2/3} times
    ``(screened norm / T^2)^{1/3}``; the total is at most ``C_YOUNG`` times
    the energy at unit surface tension.  Slice means, zero for admissible
    input up to rounding, are removed before the screened solve.
    """
    report = check_admissibility(m, h)
    if not report.passed:
        raise NumericalCheckError(
            f"pair is not admissible: flux residual {report.max_residual:.2e}"
        )
    grid = m.grid
    vals = m.values - report.slice_means.reshape((-1,) + (1,) * grid.d)
    wrap = tuple(b is Bc.PERIODIC for b in grid.bc)
    variation = _slice_variation(vals, grid.dx, wrap)
    screened = _chunked_screened_norms(vals, grid)
    terms = variation ** (2.0 / 3.0) * (screened / grid.T**2) ** (1.0 / 3.0)
    return float(grid.dz * np.sum(terms))


@dataclass(frozen=True)
class StripeBaseline:
    """Best pattern constant in height among stripes along the first axis."""

    width_cells: int
    width: float
    energy: EnergyBreakdown
    sweep: tuple[tuple[float, float], ...]

    def __iter__(self):
        yield self.width
        yield self.energy


def stripe_baseline(grid: GridSpec, sigma: float = 1.0, *, threads: int | None = None) -> StripeBaseline:
    """Sweep height-independent stripe patterns over admissible widths and
    return the energy minimiser.

    Widths are cell counts ``c`` with ``n % 2c == 0`` so the pattern has zero
    mean; the boundary sheets it leaves at the plates are carried by the
    one-cell smearing of the vertical derivative.  Ties go to the narrowest
    width.
    """
    n0 = grid.n_h[0]
    widths = [c for c in range(1, n0 // 2 + 1) if n0 % (2 * c) == 0]
    best = None
    sweep = []
    for c in widths:
        stripe = np.repeat(np.resize([1.0, -1.0], n0 // c), c)
        pattern = stripe.reshape((1, n0) + (1,) * (grid.d - 1))
        values = np.broadcast_to(pattern, grid.m_shape).copy()
        bd = total_energy(Magnetisation(grid, values, Mode.SHARP), sigma=sigma, threads=threads)
        sweep.append((c * grid.dx[0], bd.total))
        if best is None or bd.total < best[1].total:
            best = (c, bd)
    c_star, bd_star = best
    return StripeBaseline(c_star, c_star * grid.dx[0], bd_star, tuple(sweep))


@dataclass(frozen=True)
class SweepRow:
    T: float
    L: float
    N: int
    K: int
    seed: int | None
    interfacial: float
    stray: float
    total: float
    density: float
    chain_lb: float

    def __post_init__(self):
        if not self.density > 0:
            raise ValueError(f"density must be positive, got {self.density}")


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    slope: float | None
    sigma: float
    c_LT: float


def _seeded_input(grid: GridSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-0.5, 0.5, grid.m_shape)
    means = vals.reshape(grid.n_v, -1).mean(axis=1)
    return vals - means.reshape((-1,) + (1,) * grid.d)


def scaling_sweep(
    T_list,
    *,
    d: int,
    n_h,
    n_v: int,
    c_LT: float = 4.0,
    K: int = 4,
    bc: Bc = Bc.ZERO_FLUX,
    sigma: float = 1.0,
    seed: int | None = None,
    threads: int | None = None,
) -> SweepResult:
    """Build the branching competitor at ``L = c_LT * T^{2/3}`` for each
    height, with the lower-bound chain evaluated per row.

    Cell counts stay fixed across the sweep; the seed, when given, draws one
    zero-slice-mean input pattern shared by every row.  Rows are independent
    and may run on a thread pool; the result is sorted by height either way.
    The fitted slope is the least-squares slope of log density against log
    height, ``None`` below two rows.
    """
    heights = sorted(float(t) for t in T_list)
    if not heights:
        raise ValueError("need at least one height")
    pool = threads is not None and threads > 1 and len(heights) > 1

    def build_row(T: float) -> SweepRow:
        L = c_LT * T ** (2.0 / 3.0)
        N = choose_N(L, T, sigma)
        grid = GridSpec(d=d, n_h=n_h, n_v=n_v, L=L, T=T, bc=bc)
        if seed is None:
            vals = np.zeros(grid.m_shape)
        else:
            vals = _seeded_input(grid, seed)
        m_rel = Magnetisation(grid, vals, Mode.RELAXED)
        build = assemble_branching(m_rel, N, K, threads=None if pool else threads)
        bd = total_energy(build.m, build.h, sigma)
        chain = lower_bound_chain(build.m, build.h)
        return SweepRow(
            T=T, L=L, N=N, K=K, seed=seed,
            interfacial=bd.interfacial, stray=bd.stray,
            total=bd.total, density=bd.density, chain_lb=chain,
        )

    if pool:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = tuple(ex.map(build_row, heights))
    else:
        rows = tuple(build_row(T) for T in heights)

    slope = None
    if len(rows) >= 2:
        xs = np.log([r.T for r in rows])
        ys = np.log([r.density for r in rows])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return SweepResult(rows=rows, slope=slope, sigma=sigma, c_LT=c_LT)


@dataclass(frozen=True)
class ProbeResult:
    """Doubly geometric ladder of local statistics: widths shrink by theta
    per rung, heights by theta^{3/2}."""

    rungs: tuple[LocalStats, ...]
    theta: float
    violations: tuple[tuple[int, str], ...]

    @property
    def max_f(self) -> float:
        return max(s.f for s in self.rungs)

    @property
    def max_n(self) -> float:
        return max(s.n for s in self.rungs)


def local_probe(
    m: Magnetisation,
    h: StrayField,
    centre=0.0,
    *,
    anchor: Anchor = Anchor.BOTTOM,
    theta: float = 0.25,
    depth: int = 3,
    l0: float | None = None,
    t0: float | None = None,
    f_bound: float | None = None,
    n_bound: float | None = None,
) -> ProbeResult:
    """Local statistics on sub-boxes ``l_k = theta^k l0, t_k = theta^{3k/2}
    t0`` anchored at a plate, rungs ``k = 0..depth``.

    Boxes snap to cells; a ladder reaching past the lateral walls raises.
    When ``f_bound`` or ``n_bound`` is given, rungs exceeding them are
    flagged in ``violations`` as ``(k, "f")`` / ``(k, "n")``.
    """
    m.grid.require_same(h.grid)
    grid = m.grid
    if not 0.0 < theta < 1.0:
        raise ValueError(f"shrink factor must lie in (0, 1), got {theta}")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if l0 is None:
        l0 = min(grid.L)
    if t0 is None:
        t0 = grid.T
    rungs = []
    violations = []
    for k in range(depth + 1):
        sub = SubCuboid(centre, l0 * theta**k, t0 * theta ** (1.5 * k), anchor)
        stats = local_stats(m, h, sub)
        rungs.append(stats)
        if f_bound is not None and stats.f > f_bound:
            violations.append((k, "f"))
        if n_bound is not None and stats.n > n_bound:
            violations.append((k, "n"))
    return ProbeResult(tuple(rungs), theta, tuple(violations))


def write_sweep_csv(rows, path) -> None:
    """One line per sweep row: T,L,N,K,interfacial,stray,total,density,chain_lb."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "L", "N", "K", "interfacial", "stray", "total", "density", "chain_lb"])
        for r in rows:
            w.writerow([r.T, r.L, r.N, r.K, r.interfacial, r.stray, r.total, r.density, r.chain_lb])


def write_probe_csv(probe: ProbeResult, path) -> None:
    """One line per rung: k,l,t,f,f0,n,e."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "l", "t", "f", "f0", "n", "e"])
        for k, s in enumerate(probe.rungs):
            w.writerow([k, s.l, s.t, s.f, s.f0, s.n, s.e])
