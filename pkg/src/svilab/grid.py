"""Uniform grids on (0, 1), finite-difference operators and discrete energies.

Node values live on :class:`Grid` nodes, gradients on faces.  The gradient is
the forward difference ``D`` and the divergence is ``-D^T``, so summation by
parts holds to rounding and the monotonicity of the flux carries over to the
discrete drift exactly.

Conventions
-----------
``dirichlet``
    ``n`` interior nodes ``x_i = (i + 1) h`` with ``h = 1 / (n + 1)``; the zero
    boundary values enter through ``n + 1`` faces.
``periodic``
    ``n`` nodes ``x_i = i h`` with ``h = 1 / n``; face ``i`` joins nodes ``i``
    and ``i + 1`` and face ``n - 1`` is the wrap face.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .flux import FluxModel
from .tridiag import toeplitz_solver

__all__ = [
    "DIRICHLET",
    "PERIODIC",
    "Grid",
    "GridFunction",
    "EnergyValue",
    "gradient",
    "divergence_flux",
    "laplacian",
    "resolvent",
    "yosida",
    "galerkin_project",
    "energy",
    "energy_eps",
    "h1_seminorm_pairing",
    "l2_inner",
    "l2_norm",
    "regularize_initial",
    "construct_relaxation_sequence",
    "write_csv",
    "read_csv",
]

DIRICHLET = "dirichlet"
PERIODIC = "periodic"


@dataclass(frozen=True)
class Grid:
    bc: str
    n: int

    def __post_init__(self):
        if self.bc not in (DIRICHLET, PERIODIC):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.n < 3:
            raise ValueError("grids need at least three nodes")

    @property
    def periodic(self) -> bool:
        return self.bc == PERIODIC

    @property
    def h(self) -> float:
        return 1.0 / self.n if self.periodic else 1.0 / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        i = np.arange(self.n)
        return i * self.h if self.periodic else (i + 1) * self.h

    @property
    def n_faces(self) -> int:
        return self.n if self.periodic else self.n + 1

    def sample(self, f) -> "GridFunction":
        return GridFunction(self, np.asarray(f(self.x), dtype=float))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n))

    # array-level operators, acting on the last axis

    def grad(self, v):
        v = np.asarray(v, dtype=float)
        if self.periodic:
            return (np.roll(v, -1, axis=-1) - v) / self.h
        pad = [(0, 0)] * (v.ndim - 1) + [(1, 1)]
        return np.diff(np.pad(v, pad), axis=-1) / self.h

    def div(self, q):
        """``-D^T q`` for a face field ``q``."""
        q = np.asarray(q, dtype=float)
        if self.periodic:
            return (q - np.roll(q, 1, axis=-1)) / self.h
        return np.diff(q, axis=-1) / self.h

    def lap(self, v):
        return self.div(self.grad(v))

    def node_grad(self, v):
        """Average of the two faces adjacent to each node."""
        g = self.grad(v)
        if self.periodic:
            return 0.5 * (g + np.roll(g, 1, axis=-1))
        return 0.5 * (g[..., 1:] + g[..., :-1])

    def inner(self, u, w):
        return self.h * np.sum(np.asarray(u) * np.asarray(w), axis=-1)

    def solver(self, lam: float):
        """Cached factorisation of ``I - lam * Laplacian``."""
        return _solver(self.bc, self.n, float(lam))


@lru_cache(maxsize=64)
def _solver(bc: str, n: int, lam: float):
    h = 1.0 / n if bc == PERIODIC else 1.0 / (n + 1)
    r = lam / (h * h)
    return toeplitz_solver(n, -r, 1.0 + 2.0 * r, bc == PERIODIC)


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def bc(self) -> str:
        return self.grid.bc

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            other = other.values
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            other = other.values
        return self.with_values(self.values - other)

    def __mul__(self, a):
        return self.with_values(self.values * a)

    __rmul__ = __mul__


def _same_grid(u: GridFunction, w: GridFunction):
    if u.grid != w.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {w.grid}")


@dataclass(frozen=True)
class EnergyValue:
    bulk: float
    boundary: float

    @property
    def total(self) -> float:
        return self.bulk + self.boundary


def gradient(v: GridFunction) -> np.ndarray:
    """Forward differences on faces (``n + 1`` Dirichlet, ``n`` periodic)."""
    return v.grid.grad(v.values)


def divergence_flux(model: FluxModel, v: GridFunction) -> GridFunction:
    """Discrete ``div phi(grad v)`` as ``-D^T phi(D v)``."""
    g = v.grid
    return GridFunction(g, g.div(model.flux(g.grad(v.values))))


def laplacian(v: GridFunction) -> GridFunction:
    return GridFunction(v.grid, v.grid.lap(v.values))


def resolvent(v: GridFunction, lam: float) -> GridFunction:
    """Solve ``(I - lam * Laplacian) u = v``."""
    if not lam > 0:
        raise ValueError("resolvent parameter must be positive")
    return GridFunction(v.grid, v.grid.solver(lam).solve(v.values))


def yosida(v: GridFunction, n: int) -> GridFunction:
    """Yosida approximation ``n (v - J^{1/n} v)`` of ``-Laplacian``.

    Evaluated as ``-Laplacian(J^{1/n} v)``, which is algebraically identical
    and avoids the cancellation in ``v - J v`` for large ``n``.
    """
    if n < 1:
        raise ValueError("Yosida index must be at least 1")
    u = resolvent(v, 1.0 / n)
    return GridFunction(v.grid, -v.grid.lap(u.values))


def galerkin_project(v: GridFunction, m: int) -> GridFunction:
    """Orthogonal projection onto the ``m`` lowest eigenmodes of the discrete Laplacian.

    Dirichlet grids use the discrete sine basis; periodic grids use the real
    Fourier basis ordered ``1, cos 1, sin 1, cos 2, ...``.
    """
    n = v.n
    if not 1 <= m <= n:
        raise ValueError(f"number of modes must lie in [1, {n}]")
    if not v.grid.periodic:
        c = scipy.fft.dst(v.values, type=1)
        c[m:] = 0.0
        return GridFunction(v.grid, scipy.fft.idst(c, type=1))
    c = scipy.fft.rfft(v.values)
    re = np.ones(c.size, dtype=bool)
    im = np.zeros(c.size, dtype=bool)
    im[1 : (n + 1) // 2] = True  # the Nyquist coefficient has no sine part
    order = [(0, "re")]
    for k in range(1, c.size):
        order.append((k, "re"))
        if im[k]:
            order.append((k, "im"))
    keep_re = np.zeros(c.size, dtype=bool)
    keep_im = np.zeros(c.size, dtype=bool)
    for k, part in order[:m]:
        (keep_re if part == "re" else keep_im)[k] = True
    c = np.where(keep_re & re, c.real, 0.0) + 1j * np.where(keep_im, c.imag, 0.0)
    return GridFunction(v.grid, scipy.fft.irfft(c, n=n))


def energy(model: FluxModel, v: GridFunction, jump_weight: float | None = None) -> EnergyValue:
    """Discrete energy ``h * sum psi(D v)`` plus an optional periodic jump term.

    With ``jump_weight=None`` every face, including the periodic wrap face,
    contributes ``h * psi(difference quotient)``; a jump across ``x = 0``
    is then priced by the recession function as ``h -> 0``.  A numeric
    ``jump_weight`` (periodic grids only) removes the wrap face from the bulk
    and charges ``jump_weight * |v(1-) - v(0+)|`` as the boundary term.
    """
    g = v.grid.grad(v.values)
    psi = np.asarray(model.potential(g))
    if jump_weight is None or not v.grid.periodic:
        return EnergyValue(float(v.h * np.sum(psi)), 0.0)
    if jump_weight < 0:
        raise ValueError("jump_weight must be nonnegative")
    bulk = float(v.h * np.sum(psi[:-1]))
    return EnergyValue(bulk, float(jump_weight * abs(v.values[-1] - v.values[0])))


def energy_eps(model: FluxModel, v: GridFunction, eps: float) -> float:
    """Viscous energy ``eps/2 * ||D v||^2 + h * sum psi(D v)``."""
    if eps < 0:
        raise ValueError("viscosity must be nonnegative")
    g = v.grid.grad(v.values)
    return float(0.5 * eps * v.h * np.sum(g * g) + v.h * np.sum(model.potential(g)))


def h1_seminorm_pairing(u: GridFunction, w: GridFunction) -> float:
    _same_grid(u, w)
    return float(u.h * np.sum(u.grid.grad(u.values) * u.grid.grad(w.values)))


def l2_inner(u: GridFunction, w: GridFunction) -> float:
    _same_grid(u, w)
    return float(u.grid.inner(u.values, w.values))


def l2_norm(v: GridFunction) -> float:
    return float(np.sqrt(v.grid.inner(v.values, v.values)))


def regularize_initial(x0: GridFunction, n: int) -> GridFunction:
    """Smoothed initial datum ``J^{1/n} x0``; never increases the energy."""
    return resolvent(x0, 1.0 / n)


def _smoothstep_down(s):
    """C^1 profile falling from 1 at ``s = 0`` to 0 at ``s = 1``."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def construct_relaxation_sequence(u, j: int, n: int, width: float | None = None) -> GridFunction:
    """Continuous periodic approximant ``u_j = u + w_j`` of a function with ``u(0) != u(1)``.

    ``w_j`` is a C^1 cut-off equal to ``(u(1) - u(0)) / 2`` at ``x = 0`` and
    ``(u(0) - u(1)) / 2`` at ``x = 1``, supported within ``width`` of the
    boundary, so that ``u_j(0) = u_j(1) = (u(0) + u(1)) / 2``.

    Parameters
    ----------
    u : callable
        Function on ``[0, 1]``, smooth in the interior.
    j : int
        Sequence index, at least 2.
    n : int
        Number of periodic grid nodes for the returned sample.
    width : float, optional
        Support of the cut-off; defaults to ``1 / j**2``.  Any value in
        ``(0, 1/j]`` keeps ``w_j`` inside the ``1/j`` collar.
    """
    if j < 2:
        raise ValueError("relaxation index j must be at least 2")
    if width is None:
        width = 1.0 / (j * j)
    if not 0.0 < width <= 1.0 / j:
        raise ValueError("cut-off width must lie in (0, 1/j]")
    grid = Grid(PERIODIC, n)
    x = grid.x
    u0, u1 = float(u(0.0)), float(u(1.0))
    w = 0.5 * (u1 - u0) * _smoothstep_down(x / width) + 0.5 * (u0 - u1) * _smoothstep_down((1.0 - x) / width)
    return GridFunction(grid, np.asarray(u(x), dtype=float) + w)


def write_csv(v: GridFunction, fh) -> None:
    """One row per node with header ``x,value``; floats at 17 significant digits."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", "value"])
    for xi, vi in zip(v.x, v.values):
        w.writerow([f"{xi:.17g}", f"{vi:.17g}"])


def read_csv(fh, bc: str) -> GridFunction:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
        raise ValueError("grid CSV must start with the header 'x,value'")
    vals = np.array([float(r[1]) for r in rows[1:] if r])
    grid = Grid(bc, vals.size)
    xs = np.array([float(r[0]) for r in rows[1:] if r])
    if not np.allclose(xs, grid.x, rtol=0, atol=1e-12):
        raise ValueError("node coordinates do not match a uniform grid with this boundary condition")
    return GridFunction(grid, vals)
