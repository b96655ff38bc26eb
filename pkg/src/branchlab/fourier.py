"""Radix-2 Fourier transforms used by the elliptic solvers.

Kept in-repo so that solver output is reproducible bit-for-bit across
environments; no external FFT backend is consulted.  Sizes must be powers of
two.  Transforms act along the last axis; leading axes are treated as a batch.
"""

from __future__ import annotations

import numpy as np

_rev_cache: dict[int, np.ndarray] = {}
_twiddle_cache: dict[int, list[np.ndarray]] = {}


def _bit_reversal(n: int) -> np.ndarray:
    rev = _rev_cache.get(n)
    if rev is None:
        idx = np.arange(n)
        rev = np.zeros(n, dtype=np.intp)
        m = n
        while m > 1:
            rev = (rev << 1) | (idx & 1)
            idx >>= 1
            m >>= 1
        _rev_cache[n] = rev
    return rev


def _twiddles(n: int) -> list[np.ndarray]:
    stages = _twiddle_cache.get(n)
    if stages is None:
        stages = []
        m = 1
        while m < n:
            stages.append(np.exp(-2j * np.pi * np.arange(m) / (2 * m)))
            m *= 2
        _twiddle_cache[n] = stages
    return stages


def fft(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Complex DFT along ``axis`` (size must be a power of two)."""
    a = np.asarray(a)
    if axis != -1 and axis != a.ndim - 1:
        return np.moveaxis(fft(np.moveaxis(a, axis, -1)), -1, axis)
    n = a.shape[-1]
    if n & (n - 1) or n == 0:
        raise ValueError(f"transform size must be a power of two, got {n}")
    x = np.ascontiguousarray(a, dtype=np.complex128)[..., _bit_reversal(n)]
    pre = x.shape[:-1]
    for w in _twiddles(n):
        m = w.shape[0]
        v = x.reshape(pre + (n // (2 * m), 2, m))
        even = v[..., 0, :]
        odd = v[..., 1, :] * w
        v[..., 1, :] = even - odd
        even += odd
    return x


def ifft(a: np.ndarray, axis: int = -1) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[axis]
    return np.conj(fft(np.conj(a), axis=axis)) / n


def fftn(a: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    for ax in axes:
        a = fft(a, axis=ax)
    return a


def ifftn(a: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    for ax in axes:
        a = ifft(a, axis=ax)
    return a
