import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svilab.tridiag import CyclicSolver, ThomasSolver, solve_cyclic, solve_tridiagonal, toeplitz_solver


def dense(lower, diag, upper, cyclic=False):
    n = diag.size
    A = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    if cyclic:
        A[0, n - 1] = lower[0]
        A[n - 1, 0] = upper[-1]
    return A


def dominant(rng, n, batch=()):
    lo = rng.uniform(-1, 1, batch + (n,))
    up = rng.uniform(-1, 1, batch + (n,))
    di = np.abs(lo) + np.abs(up) + rng.uniform(0.5, 2.0, batch + (n,))
    return lo, di, up


@pytest.mark.parametrize("n", [3, 4, 17, 64])
def test_thomas_matches_dense(rng, n):
    lo, di, up = dominant(rng, n)
    d = rng.normal(size=n)
    x = ThomasSolver(lo, di, up).solve(d)
    np.testing.assert_allclose(x, np.linalg.solve(dense(lo, di, up), d), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("n", [3, 5, 32])
def test_cyclic_matches_dense(rng, n):
    lo, di, up = dominant(rng, n)
    d = rng.normal(size=n)
    x = CyclicSolver(lo, di, up, lo[0], up[-1]).solve(d)
    np.testing.assert_allclose(x, np.linalg.solve(dense(lo, di, up, cyclic=True), d), rtol=1e-12, atol=1e-13)


def test_toeplitz_solver_periodic_and_dirichlet(rng):
    n = 20
    d = rng.normal(size=n)
    for periodic in (False, True):
        lo = np.full(n, -0.7)
        di = np.full(n, 2.5)
        A = dense(lo, di, lo.copy(), cyclic=periodic)
        np.testing.assert_allclose(toeplitz_solver(n, -0.7, 2.5, periodic).solve(d), np.linalg.solve(A, d), atol=1e-13)


def test_batch_rows_are_bitwise_identical_to_single_solves(rng):
    s = toeplitz_solver(33, -3.0, 7.0, True)
    D = rng.normal(size=(9, 33))
    batch = s.solve(D)
    for i in range(9):
        assert np.array_equal(batch[i], s.solve(D[i]))


def test_shape_mismatch_and_singular():
    with pytest.raises(ValueError):
        ThomasSolver(np.ones(3), np.ones(3), np.ones(3)).solve(np.ones(4))
    with pytest.raises(ValueError):
        ThomasSolver(np.ones(2), np.ones(3), np.ones(3))
    with pytest.raises(np.linalg.LinAlgError):
        ThomasSolver(np.zeros(3), np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        CyclicSolver(np.ones(2), np.ones(2), np.ones(2), 1.0, 1.0)


def test_variable_tridiagonal_batch(rng):
    lo, di, up = dominant(rng, 12, (5,))
    d = rng.normal(size=(5, 12))
    x = solve_tridiagonal(lo, di, up, d)
    for i in range(5):
        np.testing.assert_allclose(x[i], np.linalg.solve(dense(lo[i], di[i], up[i]), d[i]), rtol=1e-12, atol=1e-13)


def test_variable_cyclic_batch(rng):
    lo, di, up = dominant(rng, 12, (5,))
    d = rng.normal(size=(5, 12))
    x = solve_cyclic(lo, di, up, d)
    for i in range(5):
        A = dense(lo[i], di[i], up[i], cyclic=True)
        np.testing.assert_allclose(x[i], np.linalg.solve(A, d[i]), rtol=1e-12, atol=1e-13)


def test_variable_solvers_broadcast_coefficients(rng):
    lo, di, up = dominant(rng, 10)
    d = rng.normal(size=(4, 10))
    x = solve_cyclic(lo, di, up, d)
    assert x.shape == (4, 10)
    np.testing.assert_allclose(x[2], CyclicSolver(lo, di, up, lo[0], up[-1]).solve(d[2]), atol=1e-13)
    with pytest.raises(ValueError):
        solve_cyclic(lo[:2], di[:2], up[:2], d[:, :2])


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_variable_solvers_are_batch_invariant(m, seed):
    rng = np.random.default_rng(seed)
    lo, di, up = dominant(rng, 16, (m,))
    d = rng.normal(size=(m, 16))
    for solve in (solve_tridiagonal, solve_cyclic):
        full = solve(lo, di, up, d)
        for i in range(m):
            assert np.array_equal(full[i], solve(lo[i : i + 1], di[i : i + 1], up[i : i + 1], d[i : i + 1])[0])
