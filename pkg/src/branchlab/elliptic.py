"""Horizontal Poisson solves on periodic and zero-flux grids.

All functions act on the last ``len(dx)`` axes of the input; leading axes are
a batch.  The difference stencils are staggered: ``gradient`` produces fluxes
on the facet to the right of each cell, ``divergence`` consumes them, and the
composition is the exact 3/5-point Laplacian the spectral solves invert.  On
zero-flux axes the flux through the low wall is implicit zero (not stored)
and the high-wall flux occupies the last facet slot.
"""

from __future__ import annotations

import numpy as np

from . import fourier

__all__ = [
    "laplacian_symbol",
    "solve_poisson",
    "gradient",
    "divergence",
    "inv_grad_sq_norm",
    "solve_hyperplane_source",
]


def laplacian_symbol(n: int, dx: float) -> np.ndarray:
    """Eigenvalues of the discrete ``-d^2/dx^2`` on a periodic row of cells."""
    k = np.arange(n)
    return (4.0 / dx**2) * np.sin(np.pi * k / n) ** 2


def _spatial_axes(ndim: int, d: int) -> tuple[int, ...]:
    return tuple(range(ndim - d, ndim))


def _double_even(a: np.ndarray, axis: int) -> np.ndarray:
    return np.concatenate((a, np.flip(a, axis=axis)), axis=axis)


def _check_mean(rho: np.ndarray, d: int, tol: float) -> None:
    axes = _spatial_axes(rho.ndim, d)
    mean = np.abs(rho.mean(axis=axes))
    scale = max(1.0, float(np.max(np.abs(rho))) if rho.size else 0.0)
    if np.any(mean > tol * scale):
        raise ValueError(
            f"source mean {float(np.max(mean)):.3e} exceeds compatibility "
            f"tolerance; a gradient field with this divergence does not exist"
        )


def _symbol_grid(shape: tuple[int, ...], dx: tuple[float, ...]) -> np.ndarray:
    d = len(dx)
    total = np.zeros(shape[-d:])
    for a in range(d):
        s = laplacian_symbol(shape[-d + a], dx[a])
        expand = [None] * d
        expand[a] = slice(None)
        total = total + s[tuple(expand)]
    return total


def solve_poisson(
    rho: np.ndarray,
    dx: tuple[float, ...],
    bc: tuple[str, ...],
    *,
    mean_tol: float = 1e-10,
) -> np.ndarray:
    """Zero-mean ``u`` with ``-lap u = rho`` on the last ``len(dx)`` axes.

    Zero-flux axes are solved by even half-sample doubling into a periodic
    problem, which reproduces the Neumann stencil exactly.  Raises
    ``ValueError`` if the source mean is incompatible with the bc.
    """
    rho = np.asarray(rho, dtype=np.float64)
    d = len(dx)
    _check_mean(rho, d, mean_tol)
    axes = _spatial_axes(rho.ndim, d)
    work = rho
    for a in range(d):
        if bc[a] != "periodic":
            work = _double_even(work, axes[a])
    sym = _symbol_grid(work.shape, dx)
    flat = sym.reshape(-1)
    flat[0] = 1.0
    spatial = work.shape[-d:]
    batch = int(np.prod(work.shape[: work.ndim - d]))
    if batch >= 2:
        # the symbol is real, so two real solves ride one complex transform
        wb = work.reshape((batch,) + spatial)
        z = np.zeros(((batch + 1) // 2,) + spatial, dtype=np.complex128)
        z.real = wb[0::2]
        z.imag[: batch // 2] = wb[1::2]
        zax = _spatial_axes(z.ndim, d)
        u_hat = fourier.fftn(z, zax) / sym
        u_hat.reshape(z.shape[0], -1)[:, 0] = 0.0
        uz = fourier.ifftn(u_hat, zax)
        ub = np.empty_like(wb)
        ub[0::2] = uz.real
        ub[1::2] = uz.imag[: batch // 2]
        u = ub.reshape(work.shape)
    else:
        u_hat = fourier.fftn(work, axes) / sym
        u_hat.reshape(u_hat.shape[: rho.ndim - d] + (-1,))[..., 0] = 0.0
        u = fourier.ifftn(u_hat, axes).real
    flat[0] = 0.0
    for a in range(d):
        if bc[a] != "periodic":
            u = np.take(u, np.arange(rho.shape[axes[a]]), axis=axes[a])
    return u


def gradient(u: np.ndarray, dx: tuple[float, ...], bc: tuple[str, ...]) -> np.ndarray:
    """Facet fluxes of ``u``: component ``a`` holds the forward difference."""
    u = np.asarray(u, dtype=np.float64)
    d = len(dx)
    axes = _spatial_axes(u.ndim, d)
    comps = []
    for a in range(d):
        if bc[a] == "periodic":
            shifted = np.roll(u, -1, axis=axes[a])
        else:
            last = np.take(u, [-1], axis=axes[a])
            rest = np.take(u, np.arange(1, u.shape[axes[a]]), axis=axes[a])
            shifted = np.concatenate((rest, last), axis=axes[a])
        comps.append((shifted - u) / dx[a])
    return np.stack(comps, axis=-1)


def divergence(F: np.ndarray, dx: tuple[float, ...], bc: tuple[str, ...]) -> np.ndarray:
    """Flux balance per cell; adjoint (up to sign) of ``gradient``."""
    F = np.asarray(F, dtype=np.float64)
    d = len(dx)
    axes = _spatial_axes(F.ndim - 1, d)
    out = None
    for a in range(d):
        Fa = F[..., a]
        if bc[a] == "periodic":
            prev = np.roll(Fa, 1, axis=axes[a])
        else:
            lead = np.zeros_like(np.take(Fa, [0], axis=axes[a]))
            rest = np.take(Fa, np.arange(0, Fa.shape[axes[a]] - 1), axis=axes[a])
            prev = np.concatenate((lead, rest), axis=axes[a])
        term = (Fa - prev) / dx[a]
        out = term if out is None else out + term
    return out


def inv_grad_sq_norm(
    rho: np.ndarray,
    dx: tuple[float, ...],
    bc: tuple[str, ...],
    *,
    via: str = "spectral",
    mean_tol: float = 1e-10,
):
    """``integral |grad u|^2`` for the solution of ``-lap u = rho``.

    ``via="spectral"`` sums ``|rho_hat|^2 / symbol`` directly; ``via="solve"``
    goes through ``solve_poisson`` and ``gradient`` and exists as an
    independent route for cross-checks.  Leading axes are a batch and produce
    an array result.
    """
    rho = np.asarray(rho, dtype=np.float64)
    d = len(dx)
    cell = float(np.prod(dx))
    if via == "solve":
        u = solve_poisson(rho, dx, bc, mean_tol=mean_tol)
        g = gradient(u, dx, bc)
        axes = _spatial_axes(rho.ndim, d)
        val = np.sum(g * g, axis=tuple(axes) + (g.ndim - 1,)) * cell
        return float(val) if np.ndim(val) == 0 else val
    if via != "spectral":
        raise ValueError(f"unknown route {via!r}")
    _check_mean(rho, d, mean_tol)
    axes = _spatial_axes(rho.ndim, d)
    work = rho
    halved = 1.0
    for a in range(d):
        if bc[a] != "periodic":
            work = _double_even(work, axes[a])
            halved *= 2.0
    rho_hat = fourier.fftn(work, axes)
    sym = _symbol_grid(work.shape, dx)
    sym.reshape(-1)[0] = np.inf
    ncells = float(np.prod(work.shape[-d:]))
    val = np.sum(np.abs(rho_hat) ** 2 / sym, axis=axes) * cell / ncells / halved
    return float(val) if np.ndim(val) == 0 else val


def solve_hyperplane_source(f: np.ndarray, x1: float, lo: float, hi: float):
    """Neumann solve on the unit square with the mean of ``f`` moved onto a
    vertical segment ``{x1} x (lo, hi)``.

    Returns ``(u, ratio)`` where ``-lap u = f - (mean line charge)`` and
    ``ratio = integral |grad u|^2 / (length(segment)^-1 integral f^2)``.
    Segment endpoints snap to the grid; the north/south walls see no flux.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError("f must be square")
    n = f.shape[0]
    if n & (n - 1):
        raise ValueError("resolution must be a power of two")
    dx = 1.0 / n
    j = min(max(int(round(x1 * n)), 0), n - 1)
    i_lo = int(round(lo * n))
    i_hi = int(round(hi * n))
    if not 0 <= i_lo < i_hi <= n:
        raise ValueError("segment snaps to an empty range")
    length = (i_hi - i_lo) * dx
    total = float(f.sum()) * dx * dx
    rhs = f.copy()
    rhs[j, i_lo:i_hi] -= total / (length * dx)
    rhs -= rhs.mean()
    bc = ("zero-flux", "zero-flux")
    u = solve_poisson(rhs, (dx, dx), bc)
    grad_sq = float(np.sum(gradient(u, (dx, dx), bc) ** 2)) * dx * dx
    f_sq = float(np.sum(f * f)) * dx * dx
    if f_sq == 0.0:
        return u, 0.0
    return u, grad_sq / (f_sq / length)
