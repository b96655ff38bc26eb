import numpy as np
import pytest

from branchlab.core import Bc, GridSpec, Magnetisation, Mode


def make_grid(d=1, n_h=8, n_v=4, L=1.0, T=1.0, bc="periodic") -> GridSpec:
    return GridSpec(d=d, n_h=n_h, n_v=n_v, L=L, T=T, bc=Bc(bc) if isinstance(bc, str) else bc)


def random_sharp(grid: GridSpec, seed: int, zero_mean: bool = False) -> Magnetisation:
    rng = np.random.default_rng(seed)
    if zero_mean:
        cells = int(np.prod(grid.n_h))
        if cells % 2:
            raise ValueError("balanced slices need an even cell count")
        slab = np.repeat([1.0, -1.0], cells // 2)
        values = np.stack([rng.permutation(slab) for _ in range(grid.n_v)])
        values = values.reshape(grid.m_shape)
    else:
        values = rng.choice([-1.0, 1.0], size=grid.m_shape)
    return Magnetisation(grid, values, Mode.SHARP)


def random_relaxed(grid: GridSpec, seed: int, zero_mean: bool = True) -> Magnetisation:
    rng = np.random.default_rng(seed)
    values = rng.uniform(-1.0, 1.0, size=grid.m_shape)
    if zero_mean:
        spatial = tuple(range(1, 1 + grid.d))
        values -= values.mean(axis=spatial, keepdims=True)
        values /= max(1.0, float(np.max(np.abs(values))))
    return Magnetisation(grid, values, Mode.RELAXED)


def random_field_values(grid: GridSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(size=grid.h_shape)


@pytest.fixture
def grid1():
    return make_grid(d=1, n_h=16, n_v=8, L=1.0, T=1.0)


@pytest.fixture
def grid2():
    return make_grid(d=2, n_h=8, n_v=4, L=1.0, T=1.0)
