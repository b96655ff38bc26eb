import numpy as np
import pytest

from branchlab import elliptic

BC_CASES_1D = [("periodic",), ("zero-flux",)]
BC_CASES_2D = [
    ("periodic", "periodic"),
    ("zero-flux", "zero-flux"),
    ("periodic", "zero-flux"),
]


def zero_mean_rho(shape, seed):
    rng = np.random.default_rng(seed)
    rho = rng.normal(size=shape)
    return rho - rho.mean()


def test_periodic_eigenvector_exact():
    n, dx, q = 32, 0.37, 5
    u = np.cos(2 * np.pi * q * np.arange(n) / n)
    s = elliptic.laplacian_symbol(n, dx)[q]
    got = elliptic.solve_poisson(s * u, (dx,), ("periodic",))
    np.testing.assert_allclose(got, u, atol=1e-12)


def test_neumann_eigenvector_exact():
    n, dx, q = 32, 0.25, 3
    u = np.cos(np.pi * q * (np.arange(n) + 0.5) / n)
    s = (4.0 / dx**2) * np.sin(np.pi * q / (2 * n)) ** 2
    got = elliptic.solve_poisson(s * u, (dx,), ("zero-flux",))
    np.testing.assert_allclose(got, u, atol=1e-12)


@pytest.mark.parametrize("bc", BC_CASES_1D)
def test_solve_residual_1d(bc):
    dx = (0.17,)
    rho = zero_mean_rho((64,), seed=1)
    u = elliptic.solve_poisson(rho, dx, bc)
    res = -elliptic.divergence(elliptic.gradient(u, dx, bc), dx, bc)
    np.testing.assert_allclose(res, rho, atol=1e-10)
    assert abs(u.mean()) < 1e-12


@pytest.mark.parametrize("bc", BC_CASES_2D)
def test_solve_residual_2d(bc):
    dx = (0.2, 0.35)
    rho = zero_mean_rho((16, 32), seed=2)
    u = elliptic.solve_poisson(rho, dx, bc)
    res = -elliptic.divergence(elliptic.gradient(u, dx, bc), dx, bc)
    np.testing.assert_allclose(res, rho, atol=1e-10)


def test_solve_batched_matches_loop():
    dx = (0.1, 0.1)
    bc = ("zero-flux", "periodic")
    rho = np.stack([zero_mean_rho((8, 16), seed=s) for s in range(5)])
    batched = elliptic.solve_poisson(rho, dx, bc)
    for j in range(5):
        np.testing.assert_allclose(batched[j], elliptic.solve_poisson(rho[j], dx, bc), atol=1e-13)


def test_incompatible_mean_raises():
    with pytest.raises(ValueError):
        elliptic.solve_poisson(np.ones((8, 8)), (0.1, 0.1), ("periodic", "periodic"))


def test_laplacian_is_five_point():
    dx = (0.3, 0.7)
    bc = ("periodic", "periodic")
    rng = np.random.default_rng(4)
    u = rng.normal(size=(8, 8))
    lap = elliptic.divergence(elliptic.gradient(u, dx, bc), dx, bc)
    expect = (np.roll(u, -1, 0) + np.roll(u, 1, 0) - 2 * u) / dx[0] ** 2
    expect += (np.roll(u, -1, 1) + np.roll(u, 1, 1) - 2 * u) / dx[1] ** 2
    np.testing.assert_allclose(lap, expect, atol=1e-12)


@pytest.mark.parametrize("bc", BC_CASES_2D)
def test_gradient_divergence_adjoint(bc):
    dx = (0.4, 0.15)
    rng = np.random.default_rng(6)
    u = rng.normal(size=(8, 16))
    F = rng.normal(size=(8, 16, 2))
    for ax in range(2):
        if bc[ax] != "periodic":
            wall = [slice(None)] * 2
            wall[ax] = -1
            F[tuple(wall) + (ax,)] = 0.0
    lhs = np.sum(elliptic.gradient(u, dx, bc) * F)
    rhs = -np.sum(u * elliptic.divergence(F, dx, bc))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_inv_grad_cosine_closed_form():
    n, dx, q = 64, 0.11, 7
    rho = np.cos(2 * np.pi * q * np.arange(n) / n)
    L = n * dx / 2
    s = elliptic.laplacian_symbol(n, dx)[q]
    val = elliptic.inv_grad_sq_norm(rho, (dx,), ("periodic",))
    assert val == pytest.approx(L / s, rel=1e-12)


@pytest.mark.parametrize("bc", BC_CASES_1D)
def test_inv_grad_routes_agree_1d(bc):
    rho = zero_mean_rho((32,), seed=8)
    a = elliptic.inv_grad_sq_norm(rho, (0.21,), bc, via="spectral")
    b = elliptic.inv_grad_sq_norm(rho, (0.21,), bc, via="solve")
    assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("bc", BC_CASES_2D)
def test_inv_grad_routes_agree_2d(bc):
    rho = zero_mean_rho((16, 8), seed=9)
    a = elliptic.inv_grad_sq_norm(rho, (0.3, 0.12), bc, via="spectral")
    b = elliptic.inv_grad_sq_norm(rho, (0.3, 0.12), bc, via="solve")
    assert a == pytest.approx(b, rel=1e-10)


def test_inv_grad_batched():
    rho = np.stack([zero_mean_rho((16,), seed=s) for s in range(4)])
    vals = elliptic.inv_grad_sq_norm(rho, (0.5,), ("periodic",))
    assert vals.shape == (4,)
    for j in range(4):
        assert vals[j] == pytest.approx(
            elliptic.inv_grad_sq_norm(rho[j], (0.5,), ("periodic",)), rel=1e-12
        )


def random_boundary_f(n, seed):
    rng = np.random.default_rng(seed)
    x = (np.arange(n) + 0.5) / n
    f = np.zeros((n, n))
    for _ in range(4):
        qx, qy = rng.integers(0, 5, size=2)
        amp = rng.normal()
        f += amp * np.cos(np.pi * qx * x)[:, None] * np.cos(np.pi * qy * x)[None, :]
    return f


class TestHyperplaneSource:
    def test_residual_and_mean(self):
        f = random_boundary_f(32, seed=3)
        u, ratio = elliptic.solve_hyperplane_source(f, 0.5, 0.25, 0.75)
        assert abs(u.mean()) < 1e-12
        assert ratio > 0
        dx = 1.0 / 32
        bc = ("zero-flux", "zero-flux")
        res = -elliptic.divergence(elliptic.gradient(u, (dx, dx), bc), (dx, dx), bc)
        total = f.sum() * dx * dx
        rhs = f.copy()
        rhs[16, 8:24] -= total / (0.5 * dx)
        np.testing.assert_allclose(res, rhs - rhs.mean(), atol=1e-9)

    def test_homogeneous_degree_zero(self):
        f = random_boundary_f(32, seed=5)
        _, r1 = elliptic.solve_hyperplane_source(f, 0.25, 0.0, 0.5)
        _, r2 = elliptic.solve_hyperplane_source(3.0 * f, 0.25, 0.0, 0.5)
        assert r1 == pytest.approx(r2, rel=1e-12)

    def test_zero_source(self):
        u, ratio = elliptic.solve_hyperplane_source(np.zeros((16, 16)), 0.5, 0.25, 0.75)
        assert ratio == 0.0
        np.testing.assert_allclose(u, 0.0, atol=1e-14)

    def test_audit_ratio_bounded(self):
        # Empirical record over 1000 seeded draws; the bound is the observed
        # maximum with margin, not a derived constant.
        worst = 0.0
        for seed in range(1000):
            rng = np.random.default_rng(10_000 + seed)
            f = random_boundary_f(32, seed=10_000 + seed)
            lo, hi = sorted(rng.uniform(0.0, 1.0, size=2))
            if round(hi * 32) - round(lo * 32) < 4:
                continue
            x1 = rng.uniform(0.0, 1.0)
            _, ratio = elliptic.solve_hyperplane_source(f, x1, lo, hi)
            worst = max(worst, ratio)
        assert worst < 0.30

    def test_audit_refinement_controlled(self):
        worst = 0.0
        for seed in range(50):
            f32 = random_boundary_f(32, seed=20_000 + seed)
            f64 = random_boundary_f(64, seed=20_000 + seed)
            _, r32 = elliptic.solve_hyperplane_source(f32, 0.5, 0.25, 0.75)
            _, r64 = elliptic.solve_hyperplane_source(f64, 0.5, 0.25, 0.75)
            worst = max(worst, r64 / r32)
        assert worst < 1.05
