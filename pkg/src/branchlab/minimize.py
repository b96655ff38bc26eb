"""Reference annealer for the discrete energy at desk scale.

Moves never change a slice mean: single flips are paired with a compensating
flip of an opposite-sign cell in the same slice, and column swaps permute
whole vertical columns.  Energy differences are exact: a flip touches at most
``2d`` interfacial facets and two charge slices, whose cached spectra are
updated in place.  Not a competitive solver; it exists to sandwich the
explicit constructions between feasibility and the lower bound.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import fourier
from .elliptic import _double_even, _symbol_grid, inv_grad_sq_norm
from .core import Bc, GridSpec, Magnetisation, Mode, vertical_charge
from .energy import interfacial_energy, stray_energy_minimal

__all__ = [
    "SplitMix64",
    "AnnealConfig",
    "AnnealResult",
    "flip_delta",
    "anneal",
    "write_trace_csv",
]

_MASK = (1 << 64) - 1
_MOVES = ("single-flip", "column-swap")


class SplitMix64:
    """Fixed 64-bit generator so runs reproduce bit-exactly anywhere.

    Per draw: ``state += 0x9E3779B97F4A7C15``; then on ``z = state``,
    ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
    z *= 0x94D049BB133111EB; z ^= z >> 31``, everything mod 2^64.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_raw(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_raw() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        return (self.next_raw() * n) >> 64


@dataclass(frozen=True)
class AnnealConfig:
    """Schedule and move set; temperature at step k is ``rate^k / initial_beta``.

    An infinite ``initial_beta`` gives greedy descent.
    """

    seed: int
    steps: int
    initial_beta: float = 1.0
    rate: float = 0.95
    moves: tuple[str, ...] = _MOVES

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("need at least one step")
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"cooling rate must lie in (0, 1], got {self.rate}")
        if not self.initial_beta > 0.0:
            raise ValueError("initial inverse temperature must be positive")
        moves = tuple(self.moves)
        if not moves or any(mv not in _MOVES for mv in moves):
            raise ValueError(f"moves must be a non-empty subset of {_MOVES}")
        object.__setattr__(self, "moves", moves)

    @property
    def initial_temperature(self) -> float:
        return 0.0 if math.isinf(self.initial_beta) else 1.0 / self.initial_beta


@dataclass
class AnnealResult:
    m: Magnetisation
    energy: float
    trace: tuple[tuple[int, float, float], ...]
    accepted: int
    rejected: int


def _charge_targets(j: int, n_v: int) -> tuple[tuple[int, float], ...]:
    # centred vertical stencil with mirror ghosts: changing slice j moves the
    # charge of its neighbours, folding back onto j at the walls; with a
    # single slice both ghost images cancel and no charge moves at all
    if n_v == 1:
        return ()
    lo = (0, 1.0) if j == 0 else (j - 1, 1.0)
    hi = (n_v - 1, -1.0) if j == n_v - 1 else (j + 1, -1.0)
    return (lo, hi)


def _facet_jumps(vals: np.ndarray, grid: GridSpec, cells: set) -> float:
    total = 0.0
    for cell in cells:
        j, *pos = cell
        for ax in range(grid.d):
            n = grid.n_h[ax]
            facet = grid.cell_area / grid.dx[ax] * grid.dz
            for step in (-1, 1):
                q = list(pos)
                q[ax] += step
                if 0 <= q[ax] < n:
                    nb = (j, *q)
                elif grid.bc[ax] is Bc.PERIODIC:
                    q[ax] %= n
                    nb = (j, *q)
                else:
                    continue
                # a facet between two changed cells is visited from both ends
                weight = 0.5 if nb in cells else 1.0
                total += weight * abs(vals[cell] - vals[nb]) * facet
    return total


def _interfacial_delta(vals: np.ndarray, grid: GridSpec, changes: dict) -> float:
    cells = set(changes)
    before = _facet_jumps(vals, grid, cells)
    saved = {cell: vals[cell] for cell in changes}
    for cell, new in changes.items():
        vals[cell] = new
    after = _facet_jumps(vals, grid, cells)
    for cell, old in saved.items():
        vals[cell] = old
    return after - before


class _SliceSpectra:
    """Spectra of the even-doubled charge, one slice at a time, kept current
    move by move; energies follow the spectral screened-norm route exactly."""

    def __init__(self, values: np.ndarray, grid: GridSpec, sigma: float):
        self.grid = grid
        self.sigma = sigma
        self.values = values
        charge = vertical_charge(Magnetisation(grid, values, Mode.SHARP))
        work = charge
        halved = 1.0
        for ax in range(grid.d):
            if grid.bc[ax] is not Bc.PERIODIC:
                work = _double_even(work, 1 + ax)
                halved *= 2.0
        axes = tuple(range(1, 1 + grid.d))
        self.rho_hat = fourier.fftn(work, axes)
        sym = _symbol_grid(work.shape, grid.dx)
        sym.reshape(-1)[0] = np.inf
        self.sym = sym
        self.scale = grid.cell_area / float(np.prod(work.shape[1:])) / halved
        self.invgrad = np.sum(np.abs(self.rho_hat) ** 2 / sym, axis=axes) * self.scale
        self.interfacial = interfacial_energy(Magnetisation(grid, values, Mode.SHARP))

    @property
    def energy(self) -> float:
        return self.sigma * self.interfacial + 0.5 * self.grid.dz * float(
            np.sum(self.invgrad)
        )

    def _charge_deltas(self, changes: dict) -> dict[int, np.ndarray]:
        grid = self.grid
        out: dict[int, np.ndarray] = {}
        for (j, *pos), new in changes.items():
            amp = (new - self.values[(j, *pos)]) / (2.0 * grid.dz)
            for jj, sign in _charge_targets(j, grid.n_v):
                if jj not in out:
                    out[jj] = np.zeros(grid.n_h)
                out[jj][tuple(pos)] += sign * amp
        return out

    def propose(self, changes: dict):
        grid = self.grid
        d_inter = _interfacial_delta(self.values, grid, changes)
        axes = tuple(range(grid.d))
        d_stray = 0.0
        hats: dict[int, np.ndarray] = {}
        inv_new: dict[int, float] = {}
        for j, d_rho in self._charge_deltas(changes).items():
            work = d_rho
            for ax in range(grid.d):
                if grid.bc[ax] is not Bc.PERIODIC:
                    work = _double_even(work, ax)
            d_hat = fourier.fftn(work, axes)
            mixed = 2.0 * np.real(np.conj(self.rho_hat[j]) * d_hat) + np.abs(d_hat) ** 2
            d_inv = float(np.sum(mixed / self.sym)) * self.scale
            hats[j] = d_hat
            inv_new[j] = float(self.invgrad[j]) + d_inv
            d_stray += d_inv
        delta = self.sigma * d_inter + 0.5 * grid.dz * d_stray
        return delta, (changes, d_inter, hats, inv_new)

    def apply(self, payload) -> None:
        changes, d_inter, hats, inv_new = payload
        for cell, new in changes.items():
            self.values[cell] = new
        self.interfacial += d_inter
        for j, d_hat in hats.items():
            self.rho_hat[j] += d_hat
            self.invgrad[j] = inv_new[j]


def flip_delta(m: Magnetisation, cell: tuple[int, ...], sigma: float = 1.0) -> float:
    """Exact energy difference of flipping one cell of a sharp pattern.

    Only the facets around the cell and the two charge slices its vertical
    stencil reaches are re-evaluated.  A lone flip can leave a slice charge
    with nonzero mean, which no horizontal field balances; the screened norm
    is then taken with that mean projected out, the same on both slices.
    """
    grid = m.grid
    if m.mode is not Mode.SHARP:
        raise ValueError("flip moves need a sharp pattern")
    cell = tuple(int(c) for c in cell)
    shape = grid.m_shape
    if len(cell) != len(shape) or any(not 0 <= c < n for c, n in zip(cell, shape)):
        raise ValueError(f"cell {cell} outside grid of shape {shape}")
    j, *pos = cell
    vals = m.values
    old = vals[cell]
    d_inter = _interfacial_delta(vals, grid, {cell: -old})
    targets = _charge_targets(j, grid.n_v)
    d_stray = 0.0
    if targets:
        rows = sorted({jj for jj, _ in targets})
        charge = vertical_charge(m)[rows]
        after = charge.copy()
        amp = -old / grid.dz
        for jj, sign in targets:
            after[(rows.index(jj), *pos)] += sign * amp
        bc = tuple(b.value for b in grid.bc)
        inv = inv_grad_sq_norm(np.stack((charge, after)), grid.dx, bc, mean_tol=np.inf)
        d_stray = 0.5 * grid.dz * float(np.sum(inv[1]) - np.sum(inv[0]))
    return sigma * d_inter + d_stray


def _pick_pair(values: np.ndarray, grid: GridSpec, rng: SplitMix64):
    slice_cells = int(np.prod(grid.n_h))
    j = rng.below(grid.n_v)
    flat = rng.below(slice_cells)
    pos = tuple(int(i) for i in np.unravel_index(flat, grid.n_h))
    cell = (j, *pos)
    sign = values[cell]
    partners = np.flatnonzero(values[j].reshape(-1) == -sign)
    if partners.size == 0:
        return None
    mate_flat = int(partners[rng.below(int(partners.size))])
    mate = (j, *(int(i) for i in np.unravel_index(mate_flat, grid.n_h)))
    return {cell: -sign, mate: sign}


def _pick_column_swap(values: np.ndarray, grid: GridSpec, rng: SplitMix64):
    slice_cells = int(np.prod(grid.n_h))
    a = rng.below(slice_cells)
    b = rng.below(slice_cells)
    if a == b:
        return None
    pa = tuple(int(i) for i in np.unravel_index(a, grid.n_h))
    pb = tuple(int(i) for i in np.unravel_index(b, grid.n_h))
    changes = {}
    for j in range(grid.n_v):
        va, vb = values[(j, *pa)], values[(j, *pb)]
        if va != vb:
            changes[(j, *pa)] = vb
            changes[(j, *pb)] = va
    return changes or None


def anneal(m0: Magnetisation, cfg: AnnealConfig, sigma: float = 1.0) -> AnnealResult:
    """Metropolis walk over mean-preserving moves, returning the best state
    visited; with an infinite initial inverse temperature this is greedy
    descent and the energy never increases.

    Single-threaded and deterministic: the same seed replays the same chain
    bit for bit.  The trace records ``(step, temperature, energy)`` after
    every proposal with incrementally updated energies; the returned energy
    is recomputed from scratch for the best pattern.
    """
    grid = m0.grid
    if m0.mode is not Mode.SHARP:
        raise ValueError("annealing needs a sharp pattern")
    charge = vertical_charge(m0)
    means = np.abs(charge.reshape(grid.n_v, -1).mean(axis=1))
    scale = max(1.0, float(np.max(np.abs(charge))))
    if float(means.max()) > 1e-10 * scale:
        raise ValueError("slice charges of the start pattern must have zero mean")
    rng = SplitMix64(cfg.seed)
    state = _SliceSpectra(m0.values.copy(), grid, sigma)
    energy = state.energy
    best_vals = state.values.copy()
    best_energy = energy
    t0 = cfg.initial_temperature
    trace = []
    accepted = rejected = 0
    for step in range(cfg.steps):
        temperature = t0 * cfg.rate**step
        if len(cfg.moves) > 1:
            kind = cfg.moves[rng.below(len(cfg.moves))]
        else:
            kind = cfg.moves[0]
        if kind == "single-flip":
            changes = _pick_pair(state.values, grid, rng)
        else:
            changes = _pick_column_swap(state.values, grid, rng)
        if changes is None:
            rejected += 1
        else:
            delta, payload = state.propose(changes)
            take = delta <= 0.0 or (
                temperature > 0.0 and rng.uniform() < math.exp(-delta / temperature)
            )
            if take:
                state.apply(payload)
                energy += delta
                accepted += 1
                if energy < best_energy:
                    best_energy = energy
                    best_vals = state.values.copy()
            else:
                rejected += 1
        trace.append((step, temperature, energy))
    best = Magnetisation(grid, best_vals, Mode.SHARP)
    final = sigma * interfacial_energy(best) + stray_energy_minimal(best)
    return AnnealResult(best, final, tuple(trace), accepted, rejected)


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "temperature", "energy"])
        for step, temperature, energy in trace:
            writer.writerow([step, temperature, energy])
