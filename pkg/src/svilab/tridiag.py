"""Tridiagonal and cyclic tridiagonal solvers.

Constant-coefficient systems are factorised once; :meth:`ThomasSolver.solve`
then handles a batch of states ``(M, n)`` with exactly the same
floating-point operations per row as a single state.  The batched
variable-coefficient solvers eliminate along the node axis with vector
operations across the batch, with the same guarantee.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

__all__ = ["ThomasSolver", "CyclicSolver", "toeplitz_solver", "solve_tridiagonal", "solve_cyclic"]


class ThomasSolver:
    """Solve ``A x = d`` for tridiagonal ``A`` with sub/main/super diagonals.

    The factorisation is LAPACK ``gttrf``; :meth:`solve` calls ``gttrs`` with
    one right-hand side per column.  ``gttrs`` applies the same operations
    to every column, so a batched solve agrees bitwise with row-by-row
    solves.

    Parameters
    ----------
    lower : ndarray
        Sub-diagonal, length ``n``; ``lower[0]`` is ignored.
    diag : ndarray
        Main diagonal, length ``n``.
    upper : ndarray
        Super-diagonal, length ``n``; ``upper[-1]`` is ignored.
    """

    def __init__(self, lower, diag, upper):
        a = np.asarray(lower, dtype=float)
        b = np.asarray(diag, dtype=float)
        c = np.asarray(upper, dtype=float)
        n = b.size
        if a.size != n or c.size != n:
            raise ValueError("diagonals must have equal length")
        *fac, info = lapack.dgttrf(a[1:], b, c[:-1])
        if info != 0:
            raise np.linalg.LinAlgError("singular tridiagonal matrix")
        self.n = n
        self._fac = fac

    def solve(self, d):
        d = np.asarray(d, dtype=float)
        if d.shape[-1] != self.n:
            raise ValueError(f"right-hand side has length {d.shape[-1]}, expected {self.n}")
        lead = d.shape[:-1]
        cols = np.asfortranarray(d.reshape(-1, self.n).T)
        x, info = lapack.dgttrs(*self._fac, cols)
        if info != 0:
            raise ValueError(f"gttrs failed with info = {info}")
        return np.ascontiguousarray(x.T).reshape(lead + (self.n,))


class CyclicSolver:
    """Cyclic tridiagonal solve via the Sherman-Morrison correction.

    ``corner_low`` is ``A[0, n-1]`` and ``corner_up`` is ``A[n-1, 0]``.
    """

    def __init__(self, lower, diag, upper, corner_low, corner_up):
        b = np.array(diag, dtype=float)
        n = b.size
        if n < 3:
            raise ValueError("cyclic systems need at least three unknowns")
        gamma = -b[0]
        b[0] -= gamma
        b[-1] -= corner_low * corner_up / gamma
        self._inner = ThomasSolver(lower, b, upper)
        u = np.zeros(n)
        u[0] = gamma
        u[-1] = corner_up
        self._v = np.zeros(n)
        self._v[0] = 1.0
        self._v[-1] = corner_low / gamma
        self._z = self._inner.solve(u)
        self._denom = 1.0 + self._v @ self._z
        self.n = n

    def solve(self, d):
        y = self._inner.solve(d)
        fact = (y[..., 0] * self._v[0] + y[..., -1] * self._v[-1]) / self._denom
        return y - np.multiply.outer(fact, self._z)


def toeplitz_solver(n: int, off: float, diag: float, periodic: bool):
    """Solver for the constant stencil ``off, diag, off`` (cyclic if periodic)."""
    lo = np.full(n, off)
    up = np.full(n, off)
    di = np.full(n, diag)
    if periodic:
        return CyclicSolver(lo, di, up, off, off)
    return ThomasSolver(lo, di, up)


def _lead(x, shape):
    """Broadcast to ``shape`` and move the last axis first, contiguously."""
    return np.ascontiguousarray(np.moveaxis(np.broadcast_to(np.asarray(x, dtype=float), shape), -1, 0))


class _Factor:
    """Elimination factors of a batch of tridiagonal matrices, node axis first."""

    def __init__(self, a, b, c):
        n = b.shape[0]
        self.a = a
        self.cp = np.empty_like(b)
        self.piv = np.empty_like(b)
        self.piv[0] = b[0]
        self.cp[0] = c[0] / b[0]
        for k in range(1, n):
            self.piv[k] = b[k] - a[k] * self.cp[k - 1]
            self.cp[k] = c[k] / self.piv[k]

    def apply(self, d):
        """Solve for a right-hand side ``d`` with the node axis first."""
        a, cp, piv = self.a, self.cp, self.piv
        y = np.empty(np.broadcast_shapes(d.shape, piv.shape))
        y[0] = d[0] / piv[0]
        for k in range(1, y.shape[0]):
            y[k] = (d[k] - a[k] * y[k - 1]) / piv[k]
        for k in range(y.shape[0] - 2, -1, -1):
            y[k] -= cp[k] * y[k + 1]
        return y


def solve_tridiagonal(lower, diag, upper, rhs):
    """Batched Thomas solve with per-row coefficients.

    All arguments have shape ``(..., n)`` and broadcast together;
    ``lower[..., 0]`` and ``upper[..., -1]`` are ignored.  No pivoting:
    intended for diagonally dominant systems.  Each row sees the same
    operations whatever the batch.
    """
    shape = np.broadcast_shapes(*(np.shape(v) for v in (lower, diag, upper, rhs)))
    fac = _Factor(_lead(lower, shape), _lead(diag, shape), _lead(upper, shape))
    return np.ascontiguousarray(np.moveaxis(fac.apply(_lead(rhs, shape)), 0, -1))


def solve_cyclic(lower, diag, upper, rhs):
    """Batched cyclic tridiagonal solve by the Sherman-Morrison correction.

    As :func:`solve_tridiagonal`, except that ``lower[..., 0]`` is the corner
    ``A[0, n-1]`` and ``upper[..., -1]`` is the corner ``A[n-1, 0]``.
    """
    shape = np.broadcast_shapes(*(np.shape(v) for v in (lower, diag, upper, rhs)))
    n = shape[-1]
    if n < 3:
        raise ValueError("cyclic systems need at least three unknowns")
    a, b, c = _lead(lower, shape), _lead(diag, shape).copy(), _lead(upper, shape)
    corner_low, corner_up = a[0], c[-1]
    gamma = -b[0]
    b[0] = b[0] - gamma
    b[-1] = b[-1] - corner_low * corner_up / gamma
    fac = _Factor(a, b, c)
    u = np.zeros_like(b)
    u[0] = gamma
    u[-1] = corner_up
    y = fac.apply(_lead(rhs, shape))
    z = fac.apply(u)
    ratio = corner_low / gamma
    fact = (y[0] + y[-1] * ratio) / (1.0 + z[0] + z[-1] * ratio)
    return np.ascontiguousarray(np.moveaxis(y - fact * z, 0, -1))
