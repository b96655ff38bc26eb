"""Self-refining sharp patterns: the unit block, its corrector fields, and
the dyadic assembly over a slab.

A block refines a single coarse-face interval into per-sub-plaquette
intervals across one vertical cell layer (`building_block`).  Stacking
rescaled blocks over a dyadic partition of the slab height yields a sharp
competitor whose interfaces branch towards the top and bottom plates
(`assemble_branching`); even reflections plus a horizontal contraction turn
a wall-bounded competitor into a periodic one (`periodic_competitor`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import elliptic
from .core import Bc, GridSpec, Magnetisation, Mode, StrayField, reflect_even
from .energy import interfacial_energy, minimal_stray_field

__all__ = [
    "BlockCorrectors",
    "BlockGeometry",
    "BlockInput",
    "BlockRecord",
    "BranchingBuild",
    "LevelReport",
    "assemble_branching",
    "block_correctors",
    "building_block",
    "choose_N",
    "periodic_competitor",
]

# Height contraction between consecutive refinement levels.
_LEVEL_RATIO = 1.0 / (2.0 * math.sqrt(2.0))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _apportion(ideals: np.ndarray, caps: np.ndarray, target: int, slots: int = 1) -> np.ndarray:
    """Integer counts with ``sum == target``, each in ``[0, cap]``, tracking
    ``ideals`` by largest remainder.

    Entries are grouped in runs of ``slots``; remainder ties are spread
    slot-by-slot across the groups so identical groups stay identical
    whenever the budget allows.
    """
    caps = np.asarray(caps, dtype=np.int64)
    if not 0 <= target <= int(caps.sum()):
        raise ValueError(f"count target {target} outside the cap budget")
    ideals = np.clip(np.asarray(ideals, dtype=np.float64), 0.0, caps)
    counts = np.floor(ideals + 1e-9).astype(np.int64)
    rem = ideals - counts
    idx = np.arange(counts.size)
    keys = (idx // slots, idx % slots)
    short = target - int(counts.sum())
    if short > 0:
        order = np.lexsort((*keys, -rem))
        room = (caps - counts)[order] > 0
        pick = order[room & (np.cumsum(room) <= short)]
        counts[pick] += 1
        short -= pick.size
        for k in order:
            if short == 0:
                break
            add = min(int(caps[k] - counts[k]), short)
            counts[k] += add
            short -= add
    elif short < 0:
        order = np.lexsort((*keys, rem))
        room = counts[order] > 0
        pick = order[room & (np.cumsum(room) <= -short)]
        counts[pick] -= 1
        short += pick.size
        for k in order:
            if short == 0:
                break
            take = min(int(counts[k]), -short)
            counts[k] -= take
            short += take
    return counts


def _parse_resolution(resolution) -> tuple[int, int]:
    if isinstance(resolution, (tuple, list)):
        q, p = (int(v) for v in resolution)
    else:
        q = p = int(resolution)
    if q < 1:
        raise ValueError("resolution needs at least one slice")
    if p < 2 or p % 2:
        raise ValueError(f"cells per side must be even, got {p}")
    return q, p


@dataclass(frozen=True)
class BlockInput:
    """Reduced data of one block: mean over the coarse face, means over the
    ``2^d`` fine sub-faces, and an optional running slice mean.

    ``slice_profile`` maps relative height in ``[0, 1]`` (0 = fine face) to
    the slice mean; a number or ``None`` means a constant profile.  The fine
    means must average to the profile at height 0, and the profile must reach
    ``coarse_avg`` at height 1.
    """

    coarse_avg: float
    fine_avgs: tuple[float, ...]
    slice_profile: Callable[[float], float] | float | None = None

    def __post_init__(self):
        object.__setattr__(self, "coarse_avg", float(self.coarse_avg))
        object.__setattr__(self, "fine_avgs", tuple(float(v) for v in self.fine_avgs))
        if len(self.fine_avgs) not in (2, 4):
            raise ValueError("need 2 or 4 fine-face averages")
        vals = (self.coarse_avg, *self.fine_avgs, self._profile(0.0), self._profile(1.0))
        if max(abs(v) for v in vals) > 1.0 + 1e-12:
            raise ValueError("averages must lie in [-1, 1]")
        f0 = sum(self.fine_avgs) / len(self.fine_avgs)
        if abs(f0 - self._profile(0.0)) > 1e-8:
            raise ValueError("fine-face averages must average to the slice mean at the fine face")
        if abs(self._profile(1.0) - self.coarse_avg) > 1e-8:
            raise ValueError("slice mean at the coarse face must equal the coarse average")

    @property
    def d(self) -> int:
        return 1 if len(self.fine_avgs) == 2 else 2

    def _profile(self, y3: float) -> float:
        p = self.slice_profile
        if p is None:
            return self.coarse_avg
        if callable(p):
            return float(p(y3))
        return float(p)

    def slice_mean(self, y3: float) -> float:
        """Model mean of the slice at relative height ``y3``."""
        if y3 >= 0.5:
            return self._profile(y3)
        f0 = sum(self.fine_avgs) / len(self.fine_avgs)
        return (1.0 - 2.0 * y3) * f0 + 2.0 * y3 * self._profile(y3)

    def sub_mean(self, idx: int, y3: float) -> float:
        """Model mean over fine sub-face ``idx`` at height ``y3 < 1/2``."""
        return (1.0 - 2.0 * y3) * self.fine_avgs[idx] + 2.0 * y3 * self._profile(y3)


def _profile_slope(inp: BlockInput, y3: float, q: int) -> float:
    if not callable(inp.slice_profile):
        return 0.0
    step = 0.5 / q
    lo, hi = max(0.0, y3 - step), min(1.0, y3 + step)
    return (inp._profile(hi) - inp._profile(lo)) / (hi - lo)


def _upper_counts(y3: float, mbar: np.ndarray, W: int, target: int | None) -> np.ndarray:
    """Cells of the two +1 runs per plaquette, anchored at 0 and W/2."""
    e1 = np.minimum(y3 * (1.0 + mbar) / 2.0, 0.5)
    e2 = np.maximum((1.0 - y3) * (1.0 + mbar) / 2.0, mbar / 2.0)
    ideals = (W * np.stack([e1, e2], axis=-1)).reshape(-1)
    if target is None:
        target = _round_half_up(float(ideals.sum()))
    caps = np.full(ideals.size, W // 2, dtype=np.int64)
    return _apportion(ideals, caps, target, slots=2)


def _lower_counts(msub: np.ndarray, W: int, target: int | None, slots: int) -> np.ndarray:
    """Cells of the +1 run per sub-plaquette, anchored at its left edge."""
    ideals = (W * (1.0 + np.asarray(msub)) / 4.0).reshape(-1)
    if target is None:
        target = _round_half_up(float(ideals.sum()))
    caps = np.full(ideals.size, W // 2, dtype=np.int64)
    return _apportion(ideals, caps, target, slots=slots)


def _fill_1d(counts: np.ndarray, n: int) -> np.ndarray:
    # runs of width W/2 tile the axis in anchor order for both halves
    half = n // counts.size
    return (np.arange(half)[None, :] < counts[:, None]).reshape(n)


def _fill_upper_2d(counts, Pa, Pb, Wa, Wb) -> np.ndarray:
    col = (np.arange(Wa // 2)[None, :] < counts[:, None]).reshape(Pa, Pb, Wa)
    x = np.broadcast_to(col[:, :, :, None], (Pa, Pb, Wa, Wb))
    return x.transpose(0, 2, 1, 3).reshape(Pa * Wa, Pb * Wb)


def _fill_lower_2d(counts, Pa, Pb, Wa, Wb) -> np.ndarray:
    col = (np.arange(Wa // 2)[None, :] < counts[:, None]).reshape(Pa, Pb, 2, 2, Wa // 2)
    x = col.transpose(0, 2, 4, 1, 3)[..., None]
    x = np.broadcast_to(x, (Pa, 2, Wa // 2, Pb, 2, Wb // 2))
    return x.reshape(Pa * Wa, Pb * Wb)


def building_block(inp: BlockInput, resolution) -> np.ndarray:
    """Sample the block pattern on ``(q, p[, p])`` cells, fine face first.

    Upper slices carry +1 on ``[0, eta1] + [1/2, eta2]`` per plaquette, lower
    slices one left-anchored run per sub-plaquette; run lengths are rounded
    so every slice keeps the model mean to the nearest cell count.
    """
    q, p = _parse_resolution(resolution)
    d = inp.d
    out = np.empty((q,) + (p,) * d)
    for j in range(q):
        y3 = (j + 0.5) / q
        if y3 >= 0.5:
            mbar = np.array([inp.slice_mean(y3)])
            counts = _upper_counts(y3, mbar, p, None)
            mask = _fill_1d(counts, p) if d == 1 else _fill_upper_2d(counts, 1, 1, p, p)
        else:
            msub = np.array([inp.sub_mean(k, y3) for k in range(2**d)])
            counts = _lower_counts(msub, p, None, 2**d)
            mask = _fill_1d(counts, p) if d == 1 else _fill_lower_2d(counts, 1, 1, p, p)
        out[j] = np.where(mask, 1.0, -1.0)
    return out


@dataclass
class BlockCorrectors:
    """Horizontal fields balancing the vertical charge of a block pattern
    against its model, split by role; ``total`` is their sum."""

    shift: np.ndarray
    slope: np.ndarray
    solve: np.ndarray
    residual: float
    mean_defect: float

    @property
    def total(self) -> np.ndarray:
        return self.shift + self.slope + self.solve


def _model_slice(inp: BlockInput, y3: float, p: int) -> np.ndarray:
    if y3 >= 0.5:
        return np.full((p, p), inp.slice_mean(y3))
    h = p // 2
    out = np.empty((p, p))
    for i in (0, 1):
        for j in (0, 1):
            out[i * h:(i + 1) * h, j * h:(j + 1) * h] = inp.sub_mean(2 * i + j, y3)
    return out


def _lower_corrector(coef: np.ndarray, etas, p: int, delta: float, eps: float) -> np.ndarray:
    """Interval fields per sub-plaquette plus the two diagonal sector fields
    that route their imbalance across the right half."""
    out = np.zeros((p, p, 2))
    h = p // 2
    idx = np.arange(p)
    xf = (idx + 1.0) * delta
    xc = (idx + 0.5) * delta
    interior = idx <= p - 2
    for i in (0, 1):
        for j in (0, 1):
            k = 2 * i + j
            if i == 0:
                sel = (xf >= etas[k] - eps) & (idx <= h - 1)
                val = -coef[k]
            else:
                sel = (idx >= h) & (xf <= etas[k] + eps) & interior
                val = coef[k]
            out[sel, j * h:(j + 1) * h, 0] += val
    b0 = coef[0] + coef[2]
    b1 = coef[1] + coef[3]
    fright = (idx >= h) & interior
    m = fright[:, None] & (idx[None, :] <= h - 1) & (xc[None, :] >= xf[:, None] - 0.5 - eps)
    out[..., 0] -= b0 * m
    m = (idx[:, None] >= h) & (idx[None, :] <= h - 1) & (xf[None, :] >= xc[:, None] - 0.5 - eps)
    out[..., 1] -= b0 * m
    m = fright[:, None] & (idx[None, :] >= h) & (xc[None, :] <= 1.5 - xf[:, None] + eps)
    out[..., 0] -= b1 * m
    m = (idx[:, None] >= h) & fright[None, :] & (xf[None, :] <= 1.5 - xc[:, None] + eps)
    out[..., 1] += b1 * m
    return out


def _d3(arr: np.ndarray, dz: float) -> np.ndarray:
    ext = np.concatenate([arr[:1], arr, arr[-1:]], axis=0)
    return (ext[2:] - ext[:-2]) / (2.0 * dz)


def block_correctors(inp: BlockInput, m_tilde: np.ndarray, resolution) -> BlockCorrectors:
    """Corrector fields for a block pattern against the model of ``inp``.

    ``shift`` moves flux between the runs, ``slope`` compensates the height
    drift of the averages, ``solve`` is the per-slice potential remainder;
    their sum balances the vertical charge of ``m_tilde - model`` with zero
    lateral wall flux.  Only the two-axis case is defined.
    """
    q, p = _parse_resolution(resolution)
    if inp.d != 2:
        raise ValueError("corrector fields need two horizontal axes")
    m_tilde = np.asarray(m_tilde, dtype=np.float64)
    if m_tilde.shape != (q, p, p):
        raise ValueError(f"pattern shape {m_tilde.shape} does not match ({q}, {p}, {p})")
    delta = 1.0 / p
    eps = 1e-9 * delta
    dxs = (delta, delta)
    bc = ("zero-flux", "zero-flux")
    shift = np.zeros((q, p, p, 2))
    slope = np.zeros((q, p, p, 2))
    model = np.empty((q, p, p))
    xf = (np.arange(p) + 1.0) * delta
    fine = np.asarray(inp.fine_avgs)
    f0 = float(fine.mean())
    for j in range(q):
        y3 = (j + 0.5) / q
        model[j] = _model_slice(inp, y3, p)
        if y3 >= 0.5:
            mbar = inp.slice_mean(y3)
            if y3 * (1.0 + mbar) / 2.0 <= 0.5 + 1e-12:
                eta1 = min(y3 * (1.0 + mbar) / 2.0, 0.5)
                eta2 = 0.5 + max((1.0 - y3) * (1.0 + mbar) / 2.0, mbar / 2.0)
                sel = (xf >= eta1 - eps) & (xf <= eta2 + eps)
                sel[p - 1] = False
                shift[j, sel, :, 0] = -(1.0 + mbar)
                slope[j, sel, :, 0] = -y3 * _profile_slope(inp, y3, q)
        else:
            subs = np.array([inp.sub_mean(k, y3) for k in range(4)])
            etas = [0.5 * (k // 2) + 0.25 * (1.0 + subs[k]) for k in range(4)]
            shift[j] = _lower_corrector(inp.slice_mean(y3) - subs, etas, p, delta, eps)
            slope[j] = _lower_corrector(2.0 * y3 * (fine - f0), etas, p, delta, eps)
    dz = 1.0 / q
    rho = _d3(m_tilde - model, dz) + elliptic.divergence(shift + slope, dxs, bc)
    means = rho.mean(axis=(1, 2))
    defect = float(np.max(np.abs(means)))
    u = elliptic.solve_poisson(rho - means[:, None, None], dxs, bc)
    solve = elliptic.gradient(u, dxs, bc)
    res = _d3(m_tilde - model, dz) + elliptic.divergence(shift + slope + solve, dxs, bc)
    return BlockCorrectors(shift, slope, solve, float(np.max(np.abs(res))), defect)


def choose_N(L: float, T: float, sigma: float = 1.0) -> int:
    """Coarse plaquette parameter matching the optimal domain width."""
    if L <= 0 or T <= 0 or sigma <= 0:
        raise ValueError("extents and surface tension must be positive")
    return max(1, _round_half_up(L / (T ** (2.0 / 3.0) * sigma ** (1.0 / 3.0))))


@dataclass(frozen=True)
class BlockGeometry:
    """Placement of one block: refinement level, plaquette index, horizontal
    width, snapped height, physical lower corner, refinement direction."""

    level: int
    index: tuple[int, ...]
    width: float
    height: float
    origin: tuple[float, ...]
    orientation: str


@dataclass(frozen=True)
class BlockRecord:
    geometry: BlockGeometry
    coarse_avg: float
    fine_avgs: tuple[float, ...]


@dataclass(frozen=True)
class LevelReport:
    level: int
    plaquettes: tuple[int, ...]
    cells: tuple[int, ...]
    slices: int
    width: float
    height: float
    interfacial: float
    field: float


@dataclass
class BranchingBuild:
    """Assembled competitor with per-level energy reports and a manifest of
    every placed block."""

    m: Magnetisation
    h: StrayField
    N: int
    K: int
    levels: tuple[LevelReport, ...]
    stub_slices: int
    stub_interfacial: float
    stub_field: float
    jump_max: float
    field_distance: float
    interfacial_constant: float
    field_constant: float
    mean_defect: float
    manifest: list[BlockRecord]

    def __iter__(self):
        return iter((self.m, self.h))


def _vertical_ranges(n_half: int, K: int) -> tuple[int, dict[int, tuple[int, int]]]:
    r = _LEVEL_RATIO
    fracs = [r**K] + [r**k * (1.0 / r - 1.0) for k in range(K, 0, -1)]
    ideals = np.asarray(fracs) * n_half
    counts = _apportion(ideals, np.full(len(fracs), n_half, dtype=np.int64), n_half)
    v_stub = int(counts[0])
    ranges = {}
    z = v_stub
    for pos, k in enumerate(range(K, 0, -1), start=1):
        v = int(counts[pos])
        if v < 1:
            raise ValueError(
                f"vertical resolution {2 * n_half} cannot resolve level {k}"
            )
        ranges[k] = (z, z + v)
        z += v
    return v_stub, ranges


def _box_means(arr: np.ndarray, Ps: tuple[int, ...]) -> np.ndarray:
    if arr.ndim == 1:
        return arr.reshape(Ps[0], -1).mean(1)
    Pa, Pb = Ps
    return arr.reshape(Pa, arr.shape[0] // Pa, Pb, arr.shape[1] // Pb).mean((1, 3))


def _build_half(vals: np.ndarray, grid: GridSpec, N: int, K: int,
                v_stub: int, ranges: dict[int, tuple[int, int]]):
    """Pattern for one half-slab, plus per-level face averages for the
    manifest; ``vals`` is ordered coarse face last."""
    d = grid.d
    n_half = vals.shape[0]
    out = np.empty_like(vals)
    faces = {}
    stub_msub = None
    stub_geom = None
    for k in range(K, 0, -1):
        P = 2 ** (k + 1) * N
        Ps = (P,) * d
        Ws = tuple(n // P for n in grid.n_h)
        Wa = Ws[0]
        z0, z1 = ranges[k]
        face = 0.5 * (vals[z0 - 1] + vals[z0]) if z0 > 0 else vals[0]
        F2 = _box_means(face, tuple(2 * p for p in Ps))
        cface = 0.5 * (vals[z1 - 1] + vals[z1]) if z1 < n_half else vals[n_half - 1]
        faces[k] = (_box_means(cface, Ps), F2)
        if d == 1:
            msub0 = F2.reshape(P, 2)
            upper_target = P * Wa // 2
            lower_target = P * Wa // 2
        else:
            msub0 = F2.reshape(P, 2, P, 2).transpose(0, 2, 1, 3)
            upper_target = P * P * Wa // 2
            lower_target = P * P * Wa
        v = z1 - z0
        for z in range(z0, z1):
            y3 = (z - z0 + 0.5) / v
            mu = _box_means(vals[z], Ps)
            if y3 >= 0.5:
                counts = _upper_counts(y3, mu.reshape(-1), Wa, upper_target)
                mask = (_fill_1d(counts, grid.n_h[0]) if d == 1
                        else _fill_upper_2d(counts, P, P, *Ws))
            else:
                blend = (1.0 - 2.0 * y3) * msub0 + 2.0 * y3 * (
                    mu[:, None] if d == 1 else mu[:, :, None, None])
                counts = _lower_counts(blend.reshape(-1), Wa, lower_target, 2**d)
                mask = (_fill_1d(counts, grid.n_h[0]) if d == 1
                        else _fill_lower_2d(counts, P, P, *Ws))
            out[z] = np.where(mask, 1.0, -1.0)
        if k == K:
            stub_msub = msub0
            stub_geom = (Ps, Ws, lower_target)
    if v_stub:
        Ps, Ws, lower_target = stub_geom
        counts = _lower_counts(stub_msub.reshape(-1), Ws[0], lower_target, 2**d)
        mask = (_fill_1d(counts, grid.n_h[0]) if d == 1
                else _fill_lower_2d(counts, Ps[0], Ps[1], *Ws))
        out[:v_stub] = np.where(mask, 1.0, -1.0)
    return out, faces


def _level_jump_max(hv: np.ndarray, Ps: tuple[int, ...], Ws: tuple[int, ...],
                    grid: GridSpec) -> float:
    """Largest per-block sum of lateral-face jump fractions."""
    d = grid.d
    nz = hv.shape[0]
    J = np.zeros(Ps)
    for ax in range(d):
        P, W = Ps[ax], Ws[ax]
        arr_ax = 1 + ax
        pairs = []
        if P > 1:
            planes = np.arange(1, P) * W
            jump = 0.5 * np.abs(np.take(hv, planes, axis=arr_ax)
                                - np.take(hv, planes - 1, axis=arr_ax))
            pairs.append((jump, np.arange(P - 1), np.arange(1, P)))
        if grid.bc[ax] is Bc.PERIODIC:
            wrap = 0.5 * np.abs(np.take(hv, [0], axis=arr_ax)
                                - np.take(hv, [-1], axis=arr_ax))
            pairs.append((wrap, np.array([P - 1]), np.array([0])))
        for jump, left, right in pairs:
            if d == 1:
                frac = jump.sum(axis=0) / nz
                np.add.at(J, left, frac)
                np.add.at(J, right, frac)
            elif ax == 0:
                Po, Wo = Ps[1], Ws[1]
                seg = jump.reshape(nz, -1, Po, Wo).sum((0, 3)) / (nz * Wo)
                np.add.at(J, left, seg)
                np.add.at(J, right, seg)
            else:
                Po, Wo = Ps[0], Ws[0]
                seg = jump.reshape(nz, Po, Wo, -1).sum((0, 2)) / (nz * Wo)
                np.add.at(J.T, left, seg.T)
                np.add.at(J.T, right, seg.T)
    return float(J.max()) if J.size else 0.0


def _slab_interfacial(m: Magnetisation, lo: int, hi: int) -> float:
    if hi <= lo:
        return 0.0
    g = m.grid
    sub = Magnetisation(g.replace(n_v=hi - lo, T=(hi - lo) * g.dz), m.values[lo:hi], m.mode)
    return interfacial_energy(sub)


def _slab_field(h: StrayField, lo: int, hi: int) -> float:
    v = h.values[lo:hi]
    return 0.5 * float(np.sum(v * v)) * h.grid.cell_volume


def assemble_branching(m_rel: Magnetisation, N: int, K: int,
                       grid: GridSpec | None = None, *,
                       threads: int | None = None) -> BranchingBuild:
    """Sharp competitor tracking ``m_rel`` by blocks on a dyadic height
    partition, refining towards both plates, with its minimal field.

    Every horizontal axis must split into ``2^(K+1) * N`` plaquettes of even
    cell width, the vertical axis into two mirrored halves; slice means of
    ``m_rel`` must vanish so the ±1 pattern can match them exactly.
    """
    if grid is None:
        grid = m_rel.grid
    else:
        m_rel.grid.require_same(grid)
    if N < 1 or K < 1:
        raise ValueError("need N >= 1 and K >= 1")
    P_K = 2 ** (K + 1) * N
    for n in grid.n_h:
        W = n // P_K
        if n % P_K or W < 2 or W % 2:
            raise ValueError(
                f"horizontal resolution {n} cannot resolve level {K}: "
                f"needs a multiple of {2 * P_K} with {P_K} plaquettes"
            )
    if grid.n_v % 2:
        raise ValueError("vertical resolution must be even to mirror the build")
    n_half = grid.n_v // 2
    sums = m_rel.values.reshape(grid.n_v, -1).mean(axis=1)
    mean_defect = float(np.max(np.abs(sums)))
    if mean_defect > 1e-8:
        raise ValueError(
            f"slice means of m_rel must vanish (largest {mean_defect:.2e})"
        )
    vals = m_rel.values - sums.reshape((-1,) + (1,) * grid.d)
    v_stub, ranges = _vertical_ranges(n_half, K)

    bottom, faces_bot = _build_half(vals[:n_half], grid, N, K, v_stub, ranges)
    top_rev, faces_top = _build_half(vals[n_half:][::-1], grid, N, K, v_stub, ranges)
    pattern = np.concatenate([bottom, top_rev[::-1]], axis=0)
    m = Magnetisation(grid, pattern, Mode.SHARP)
    h = minimal_stray_field(m, threads=threads)

    levels = []
    jump_max = 0.0
    manifest: list[BlockRecord] = []
    n_v = grid.n_v
    for k in range(1, K + 1):
        P = 2 ** (k + 1) * N
        Ps = (P,) * grid.d
        Ws = tuple(n // P for n in grid.n_h)
        z0, z1 = ranges[k]
        spans = ((z0, z1, "down", faces_bot[k]), (n_v - z1, n_v - z0, "up", faces_top[k]))
        interfacial = sum(_slab_interfacial(m, lo, hi) for lo, hi, _, _ in spans)
        stray = sum(_slab_field(h, lo, hi) for lo, hi, _, _ in spans)
        levels.append(LevelReport(
            level=k, plaquettes=Ps, cells=Ws, slices=2 * (z1 - z0),
            width=Ws[0] * grid.dx[0], height=(z1 - z0) * grid.dz,
            interfacial=interfacial, field=stray,
        ))
        for lo, hi, orient, (cav, F2) in spans:
            jump_max = max(jump_max, _level_jump_max(m.values[lo:hi], Ps, Ws, grid))
            height = (hi - lo) * grid.dz
            if grid.d == 1:
                cav_l = cav.tolist()
                fine_l = F2.reshape(P, 2).tolist()
                for a in range(P):
                    geo = BlockGeometry(k, (a,), Ws[0] * grid.dx[0], height,
                                        (-grid.L[0] + a * Ws[0] * grid.dx[0], lo * grid.dz),
                                        orient)
                    manifest.append(BlockRecord(geo, cav_l[a], tuple(fine_l[a])))
            else:
                cav_l = cav.tolist()
                fine_l = F2.reshape(P, 2, P, 2).transpose(0, 2, 1, 3).reshape(P, P, 4).tolist()
                for a in range(P):
                    x0 = -grid.L[0] + a * Ws[0] * grid.dx[0]
                    row_c, row_f = cav_l[a], fine_l[a]
                    for b in range(P):
                        geo = BlockGeometry(k, (a, b), Ws[0] * grid.dx[0], height,
                                            (x0, -grid.L[1] + b * Ws[1] * grid.dx[1],
                                             lo * grid.dz),
                                            orient)
                        manifest.append(BlockRecord(geo, row_c[b], tuple(row_f[b])))

    stub_interfacial = _slab_interfacial(m, 0, v_stub) + _slab_interfacial(m, n_v - v_stub, n_v)
    stub_field = _slab_field(h, 0, v_stub) + _slab_field(h, n_v - v_stub, n_v)

    if np.any(vals):
        h_ref = minimal_stray_field(m_rel, threads=threads).values
    else:
        h_ref = 0.0
    field_distance = float(np.mean(np.sum((h.values - h_ref) ** 2, axis=-1)))
    L0 = float(grid.L[0])
    total_interfacial = sum(lv.interfacial for lv in levels) + stub_interfacial
    interfacial_constant = total_interfacial / ((N / L0) * float(np.prod(grid.L)) * grid.T)
    field_constant = field_distance / ((L0 / N) ** 2 / grid.T**2)

    return BranchingBuild(
        m=m, h=h, N=N, K=K, levels=tuple(levels), stub_slices=v_stub,
        stub_interfacial=stub_interfacial, stub_field=stub_field,
        jump_max=jump_max, field_distance=field_distance,
        interfacial_constant=interfacial_constant, field_constant=field_constant,
        mean_defect=mean_defect, manifest=manifest,
    )


def periodic_competitor(m: Magnetisation, h: StrayField) -> tuple[Magnetisation, StrayField]:
    """Periodic pair from a wall-bounded one: even reflection through every
    wall, then a horizontal contraction back onto the original box.

    The contraction relabels lengths and halves the reflected field
    components, so the interfacial term doubles and the field term quarters;
    the flux-balance residual is unchanged cell for cell.
    """
    grid = m.grid
    m.grid.require_same(h.grid)
    reflected = [ax for ax in range(grid.d) if grid.bc[ax] is Bc.ZERO_FLUX]
    if not reflected:
        return m.copy(), h.copy()
    m2, h2 = m, h
    for ax in reflected:
        m2, h2 = reflect_even(m2, h2, ax)
    target = GridSpec(d=grid.d, n_h=m2.grid.n_h, n_v=grid.n_v,
                      L=grid.L, T=grid.T, bc=m2.grid.bc)
    scale = np.ones(grid.d)
    scale[reflected] = 0.5
    return (
        Magnetisation(target, m2.values, m.mode),
        StrayField(target, h2.values * scale),
    )
