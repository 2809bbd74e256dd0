"""Euler-Maruyama integration of the viscous approximations.

Two problems are supported:

* :class:`DirichletVertical` -- ``dX = (eps Lap X + div phi(grad X)) dt + sum_k g^k(x, X) dbeta^k``
  with zero Dirichlet data;
* :class:`PeriodicNormal` -- the Ito form of the graph curve-shortening flow with
  normal noise, ``dX = ((eps + alpha^2/2) Lap X + (1 - alpha^2/2) d_x arctan(d_x X)) dt
  + alpha sqrt(1 + (d_x X)^2) dbeta`` on the periodic unit interval.

The semi-implicit scheme is linearly implicit in the flux: with face weights
``w = phi'(grad X_n)`` it solves

    (I - dt div((eps + alpha^2/2 + w) grad)) X_{n+1}
        = X_n + dt div(phi(grad X_n) - w grad X_n) + noise,

one tridiagonal (cyclic on periodic grids) solve per step.  Linear fluxes
are treated exactly implicitly, steep faces where the flux saturates
explicitly.  ``implicit_flux="constant"`` replaces ``w`` by ``sup phi'``
(a constant-coefficient solve), ``"none"`` keeps the whole flux explicit.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .flux import FluxModel, mean_curvature
from .grid import DIRICHLET, PERIODIC, Grid, GridFunction, energy
from .noise import ALPHA_MAX, VerticalNoiseSpec, WienerSampler, standard_normals
from .tridiag import solve_cyclic, solve_tridiagonal

__all__ = [
    "ConfigError",
    "BlowUpError",
    "DirichletVertical",
    "PeriodicNormal",
    "SimConfig",
    "PathRecord",
    "Integrator",
    "iterate_ensemble",
    "step_dirichlet_vertical",
    "step_periodic_normal",
    "simulate",
    "extract_eta",
    "normal_drift_forms",
    "normal_h1_balance",
]

SEMI_IMPLICIT = "semi_implicit"
EXPLICIT = "explicit"
IMPLICIT_FLUX = ("linearized", "constant", "none")


class ConfigError(ValueError):
    pass


class BlowUpError(FloatingPointError):
    def __init__(self, step: int, stream_id: int | None = None):
        self.step = step
        self.stream_id = stream_id
        where = f" in stream {stream_id}" if stream_id is not None else ""
        super().__init__(f"non-finite state at step {step}{where}")


@dataclass(frozen=True)
class DirichletVertical:
    model: FluxModel
    noise: VerticalNoiseSpec = VerticalNoiseSpec()

    bc = DIRICHLET

    @property
    def flux_model(self) -> FluxModel:
        return self.model

    @property
    def alpha(self) -> float:
        return 0.0


@dataclass(frozen=True)
class PeriodicNormal:
    alpha: float
    base: FluxModel = field(default_factory=mean_curvature)

    bc = PERIODIC

    def __post_init__(self):
        if not 0.0 <= self.alpha <= ALPHA_MAX + 1e-15:
            raise ConfigError(f"alpha out of range: {self.alpha} not in [0, sqrt(2)]")

    @property
    def flux_model(self) -> FluxModel:
        """Base model scaled by ``1 - alpha^2/2`` (the part left after the Ito correction)."""
        coef = self.base.coef * max(0.0, 1.0 - 0.5 * self.alpha**2)
        kind = "scaled_mean_curvature" if self.base.kind == "mean_curvature" else self.base.kind
        return dataclasses.replace(self.base, kind=kind, coef=coef, name=self.base.name)


@dataclass(frozen=True)
class SimConfig:
    problem: DirichletVertical | PeriodicNormal
    n: int
    dt: float
    T: float
    eps: float = 0.0
    scheme: str = SEMI_IMPLICIT
    record_stride: int = 1
    implicit_flux: str = "linearized"

    def __post_init__(self):
        if self.eps < 0:
            raise ConfigError("viscosity eps must be nonnegative")
        if not self.dt > 0:
            raise ConfigError("time step must be positive")
        if self.T < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.T > 0 and self.dt > self.T * (1 + 1e-12):
            raise ConfigError("time step exceeds the horizon")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError("horizon must be an integer multiple of the time step")
        if self.scheme not in (SEMI_IMPLICIT, EXPLICIT):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.record_stride < 1:
            raise ConfigError("record_stride must be at least 1")
        if self.implicit_flux not in IMPLICIT_FLUX:
            raise ConfigError(f"implicit_flux must be one of {IMPLICIT_FLUX}")
        Grid(self.problem.bc, self.n)
        if self.scheme == EXPLICIT:
            lim = self.explicit_dt_limit
            if self.dt > lim:
                raise ConfigError(f"explicit scheme unstable: dt = {self.dt} exceeds {lim:.6g}")

    @property
    def grid(self) -> Grid:
        return Grid(self.problem.bc, self.n)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def flux_model(self) -> FluxModel:
        return self.problem.flux_model

    @property
    def explicit_dt_limit(self) -> float:
        h = self.grid.h
        a = self.problem.alpha
        return h * h / (2.0 * (2.0 * self.eps + a * a + self.flux_model.max_flux_derivative))

    def with_(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)


class Integrator:
    """Precomputed operators for one configuration; acts on ``(M, n)`` batches."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.grid = g = cfg.grid
        self.model = cfg.flux_model
        prob = cfg.problem
        self.alpha = prob.alpha
        self.lin = cfg.eps + 0.5 * self.alpha**2
        self.mode = cfg.implicit_flux if cfg.scheme == SEMI_IMPLICIT else "explicit"
        if self.mode == "linearized":
            # constant face weights: the cached constant-coefficient solve is the same operator
            if self.model.coef == 0.0:
                self.mode = "none"
            elif self.model.kind == "linear":
                self.mode = "constant"
        self.gamma = self.model.max_flux_derivative if self.mode == "constant" else 0.0
        self.solver = None
        if self.mode in ("constant", "none") and self.lin + self.gamma > 0:
            self.solver = g.solver(cfg.dt * (self.lin + self.gamma))
        if isinstance(prob, DirichletVertical):
            self.K = prob.noise.K
            self.add, self.mul = prob.noise.profile_matrices(g)
        else:
            self.K = 1

    def flux_div(self, X):
        g = self.grid
        return g.div(self.model.flux(g.grad(X)))

    def explicit_drift(self, X):
        """The part of the drift evaluated at the old state."""
        return self._explicit_from_grad(self.grid.grad(X))[0]

    def _explicit_from_grad(self, G):
        # returns (explicit drift, face weights of the implicit operator or None)
        phi = self.model.flux(G)
        if self.mode == "explicit":
            return self.grid.div(phi + self.lin * G), None
        if self.mode == "none":
            return self.grid.div(phi), None
        if self.mode == "constant":
            return self.grid.div(phi - self.gamma * G), None
        w = self.model.flux_derivative(G)
        return self.grid.div(phi - w * G), self.lin + w

    def eta(self, X):
        """Subgradient selection ``eps Lap X + div phi(grad X)``."""
        out = self.flux_div(X)
        if self.cfg.eps:
            out = out + self.cfg.eps * self.grid.lap(X)
        return out

    def noise(self, X, dW):
        """Noise term for increments ``dW`` of shape ``(M, K)``."""
        return self._noise_from_grad(X, self.grid.grad(X), dW)

    def _noise_from_grad(self, X, G, dW):
        if isinstance(self.cfg.problem, DirichletVertical):
            if self.K == 0:
                return np.zeros_like(X)
            # fixed-order sum over modes: a BLAS product may round differently per batch size
            add = np.zeros_like(X)
            mul = np.zeros_like(X)
            for k in range(self.K):
                add += dW[:, k : k + 1] * self.add[k]
                mul += dW[:, k : k + 1] * self.mul[k]
            return add + mul * X
        a = 0.5 * (G + np.roll(G, 1, axis=-1))
        return self.alpha * np.sqrt(1.0 + a * a) * dW[..., :1]

    def increments(self, master_seed: int, stream_ids, step: int, coarsen: int = 1):
        """Brownian increments over ``[t_step, t_step + dt]``, shape ``(M, K)``.

        With ``coarsen = r`` the increment is the sum of the ``r`` increments
        of the finer grid ``dt / r``, so runs at ``dt`` and ``dt / r`` see the
        same Brownian path.
        """
        ids = np.asarray(stream_ids, dtype=np.uint64)[:, None]
        modes = np.arange(self.K, dtype=np.uint64)[None, :]
        z = standard_normals(master_seed, ids, step * coarsen, modes)
        for j in range(1, coarsen):
            z = z + standard_normals(master_seed, ids, step * coarsen + j, modes)
        scale = math.sqrt(self.cfg.dt / coarsen)
        return scale * np.asarray(z, dtype=float).reshape(ids.shape[0], self.K)

    def implicit_solve(self, rhs, W=None):
        """Solve ``(I - dt div(W grad)) u = rhs``; ``W=None`` uses the constant operator."""
        if W is None:
            return self.solver.solve(rhs) if self.solver is not None else rhs
        r = self.cfg.dt / self.grid.h**2
        if self.grid.periodic:
            Wm = np.roll(W, 1, axis=-1)
            return solve_cyclic(-r * Wm, 1.0 + r * (W + Wm), -r * W, rhs)
        lo, up = W[..., :-1], W[..., 1:]
        return solve_tridiagonal(-r * lo, 1.0 + r * (lo + up), -r * up, rhs)

    def step(self, X, dW):
        G = self.grid.grad(X)
        drift, W = self._explicit_from_grad(G)
        rhs = X + self.cfg.dt * drift + self._noise_from_grad(X, G, dW)
        return self.implicit_solve(rhs, W)


def iterate_ensemble(
    cfg: SimConfig,
    x0,
    master_seed: int,
    stream_ids,
    integrator: Integrator | None = None,
    coarsen: int = 1,
):
    """Yield ``(k, t_k, X_k)`` for ``k = 0..N`` with ``X_k`` of shape ``(M, n)``.

    Row ``m`` is driven by stream ``stream_ids[m]``; repeating a stream id in
    two rows couples them through the same Brownian path.  ``x0`` may be a
    single state or one state per row.  The yielded array is reused by the
    caller at its own risk: it is replaced, not mutated, by the next step.
    """
    if coarsen < 1:
        raise ValueError("coarsen must be a positive integer")
    integ = integrator or Integrator(cfg)
    ids = np.asarray(stream_ids, dtype=np.int64).reshape(-1)
    x0 = x0.values if isinstance(x0, GridFunction) else np.asarray(x0, dtype=float)
    X = np.broadcast_to(x0, (ids.size, cfg.n)).copy()
    if not np.all(np.isfinite(X)):
        raise BlowUpError(0, int(ids[np.nonzero(~np.isfinite(X).all(axis=1))[0][0]]))
    yield 0, 0.0, X
    for k in range(cfg.n_steps):
        X = integ.step(X, integ.increments(master_seed, ids, k, coarsen))
        if not np.isfinite(X).all():
            bad = int(np.nonzero(~np.isfinite(X).all(axis=1))[0][0])
            raise BlowUpError(k + 1, int(ids[bad]))
        yield k + 1, (k + 1) * cfg.dt, X


def _single_step(cfg, state, increments, problem_type):
    if not isinstance(cfg.problem, problem_type):
        raise ConfigError(f"configuration is not a {problem_type.__name__} problem")
    if state.grid != cfg.grid:
        raise ConfigError("state grid does not match the configuration")
    integ = Integrator(cfg)
    dW = np.asarray(increments, dtype=float).reshape(1, -1)
    if dW.shape[1] != integ.K:
        raise ValueError(f"expected {integ.K} increments, got {dW.shape[1]}")
    return GridFunction(state.grid, integ.step(state.values[None, :], dW)[0])


def step_dirichlet_vertical(cfg: SimConfig, state: GridFunction, increments) -> GridFunction:
    return _single_step(cfg, state, increments, DirichletVertical)


def step_periodic_normal(cfg: SimConfig, state: GridFunction, dbeta: float) -> GridFunction:
    return _single_step(cfg, state, [dbeta], PeriodicNormal)


@dataclass
class PathRecord:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    energy_trace: list = field(default_factory=list)
    l2_trace: list = field(default_factory=list)

    def write_csv(self, fh) -> None:
        """Long format ``time,node,value`` with 17 significant digits."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "node", "value"])
        for t, s in zip(self.times, self.states):
            for i, vi in enumerate(s.values):
                w.writerow([f"{t:.17g}", i, f"{vi:.17g}"])

    def summary(self) -> dict:
        return {
            "times": list(self.times),
            "energy_bulk": [e.bulk for e in self.energy_trace],
            "energy_boundary": [e.boundary for e in self.energy_trace],
            "energy_total": [e.total for e in self.energy_trace],
            "l2": list(self.l2_trace),
        }


def simulate(cfg: SimConfig, x0: GridFunction, sampler: WienerSampler) -> PathRecord:
    """One trajectory, recorded every ``record_stride`` steps and at the horizon.

    Raises :class:`BlowUpError` when the state or the recorded ``eta``
    stops being finite.
    """
    if x0.grid != cfg.grid:
        raise ConfigError("initial state grid does not match the configuration")
    integ = Integrator(cfg)
    rec = PathRecord()
    N = cfg.n_steps
    for k, t, X in iterate_ensemble(cfg, x0, sampler.master_seed, [sampler.stream_id], integ):
        if k % cfg.record_stride and k != N:
            continue
        s = GridFunction(cfg.grid, X[0])
        with np.errstate(over="ignore", invalid="ignore"):
            eta = integ.eta(X)[0]
        if not np.all(np.isfinite(eta)):
            raise BlowUpError(k, sampler.stream_id)
        rec.times.append(t)
        rec.states.append(s)
        rec.eta.append(GridFunction(cfg.grid, eta))
        rec.energy_trace.append(energy(cfg.flux_model, s))
        rec.l2_trace.append(float(np.sqrt(cfg.grid.inner(X[0], X[0]))))
    return rec


def extract_eta(cfg: SimConfig, path: PathRecord) -> list:
    """Recompute ``eps Lap X + div phi(grad X)`` at every recorded state and store it."""
    integ = Integrator(cfg)
    path.eta = [GridFunction(s.grid, integ.eta(s.values[None, :])[0]) for s in path.states]
    return path.eta


# Ito drift of the normal-noise problem, written from node values


def _node_derivatives(v: GridFunction):
    if not v.grid.periodic:
        raise ValueError("normal noise is defined on periodic grids only")
    return v.grid.node_grad(v.values), v.grid.lap(v.values)


def normal_drift_forms(v: GridFunction, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """The two algebraic forms of the normal-noise drift, nodewise.

    With ``a`` the node-centred slope and ``b`` the second difference,
    returns ``(alpha^2/2) b + (1 - alpha^2/2) b / (1 + a^2)`` and
    ``(alpha^2/2) b a^2 / (1 + a^2) + b / (1 + a^2)``.  They agree up to
    rounding; the second shows how the Ito correction cancels the
    degenerate part of the curvature term.
    """
    a, b = _node_derivatives(v)
    q = 1.0 + a * a
    c = 0.5 * alpha * alpha
    return c * b + (1.0 - c) * b / q, c * b * a * a / q + b / q


def normal_h1_balance(v: GridFunction, alpha: float, eps: float = 0.0) -> dict:
    """Terms of the H^1 Ito balance ``2 (drift, v)_{H^1} + ||d_x B(v)||^2``.

    All integrands share the node values ``a`` and ``b``; ``(f, v)_{H^1}`` is
    taken as ``-h sum f b`` and ``d_x B = alpha a b / sqrt(1 + a^2)``.  The
    sum never exceeds ``bound = -2 eps h sum b^2``.
    """
    a, b = _node_derivatives(v)
    h = v.h
    q = 1.0 + a * a
    c = 0.5 * alpha * alpha
    drift = eps * b + c * b + (1.0 - c) * b / q
    drift_term = -2.0 * h * float(np.sum(drift * b))
    noise_term = alpha * alpha * h * float(np.sum(a * a * b * b / q))
    return {
        "drift": drift_term,
        "noise": noise_term,
        "total": drift_term + noise_term,
        "bound": -2.0 * eps * h * float(np.sum(b * b)),
        "scale": h * float(np.sum(b * b)) * (1.0 + 2.0 * eps + alpha * alpha),
    }
