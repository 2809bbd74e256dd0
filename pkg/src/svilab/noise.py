"""Noise coefficients and reproducible Brownian increments.

Vertical noise is a finite family of modes ``g^k(x, r)`` that are either
additive (``a * p(x)``) or linear multiplicative (``a * p(x) * r``).  Normal
noise is ``alpha * sqrt(1 + (dv/dx)^2)`` on periodic grids.

Increments come from a counter-based generator: the standard normal used for
``(master_seed, stream_id, step, mode)`` is a pure function of that tuple, so
results do not depend on batch sizes or on the order in which paths are run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .grid import Grid, GridFunction

__all__ = [
    "SineProfile",
    "PolynomialProfile",
    "BumpProfile",
    "profile_from_dict",
    "ModeSpec",
    "Envelope",
    "VerticalNoiseSpec",
    "NormalNoiseSpec",
    "TraceClassError",
    "WienerSampler",
    "geometric_family",
    "mu_k",
    "check_trace_class",
    "apply_vertical",
    "apply_normal",
    "sample_increments",
    "standard_normals",
]

ALPHA_MAX = math.sqrt(2.0)


class TraceClassError(ValueError):
    pass


@dataclass(frozen=True)
class SineProfile:
    """``scale * sin(k pi x)``."""

    k: int = 1
    scale: float = 1.0

    def __call__(self, x):
        return self.scale * np.sin(self.k * np.pi * np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.scale * self.k * np.pi * np.cos(self.k * np.pi * np.asarray(x, dtype=float))

    def to_dict(self):
        return {"type": "sine", "k": self.k, "scale": self.scale}


@dataclass(frozen=True)
class PolynomialProfile:
    """``sum_i coeffs[i] * x**i``."""

    coeffs: tuple = (0.0,)

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coeffs)

    def derivative(self, x):
        d = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else [0.0]
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), d)

    def to_dict(self):
        return {"type": "polynomial", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class BumpProfile:
    """Smooth compactly supported bump ``scale * exp(1 - 1/(1 - s^2))``, ``s = (x - center)/radius``."""

    center: float = 0.5
    radius: float = 0.25
    scale: float = 1.0

    def _s(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.radius

    def __call__(self, x):
        s = self._s(x)
        inside = np.abs(s) < 1
        out = np.zeros_like(s)
        out[inside] = self.scale * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out

    def derivative(self, x):
        s = self._s(x)
        inside = np.abs(s) < 1
        out = np.zeros_like(s)
        si = s[inside]
        out[inside] = (
            self.scale * np.exp(1.0 - 1.0 / (1.0 - si**2)) * (-2.0 * si / (1.0 - si**2) ** 2) / self.radius
        )
        return out

    def to_dict(self):
        return {"type": "bump", "center": self.center, "radius": self.radius, "scale": self.scale}


_PROFILES = {"sine": SineProfile, "polynomial": PolynomialProfile, "bump": BumpProfile}


def profile_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("type")
    if kind not in _PROFILES:
        raise ValueError(f"unknown profile {kind!r}; expected one of {sorted(_PROFILES)}")
    if kind == "polynomial":
        d["coeffs"] = tuple(d.get("coeffs", (0.0,)))
    return _PROFILES[kind](**d)


@dataclass(frozen=True)
class ModeSpec:
    form: str
    profile: object
    amplitude: float = 1.0

    def __post_init__(self):
        if self.form not in ("additive", "multiplicative"):
            raise ValueError("mode form must be 'additive' or 'multiplicative'")
        if self.form == "additive":
            ends = np.abs(self.profile(np.array([0.0, 1.0])))
            if np.any(ends > 1e-12):
                raise ValueError("additive noise profiles must vanish at x = 0 and x = 1")

    def __call__(self, x, r):
        base = self.amplitude * self.profile(x)
        return base * r if self.form == "multiplicative" else base + 0.0 * np.asarray(r)

    def to_dict(self):
        return {"form": self.form, "amplitude": self.amplitude, "profile": self.profile.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["form"], profile_from_dict(d["profile"]), float(d.get("amplitude", 1.0)))


@dataclass(frozen=True)
class Envelope:
    """Declared upper envelope ``constant * decay(k)`` for the sequence ``mu_k``.

    ``geometric``: ``decay = rate**k`` (summable iff ``rate < 1``);
    ``power``: ``decay = k**(-rate)`` (summable iff ``rate > 1``).  A
    ``geometric`` envelope may carry a polynomial prefactor ``k**degree``.
    """

    kind: str = "geometric"
    rate: float = 0.5
    constant: float = 1.0
    degree: float = 0.0

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        if self.kind == "geometric":
            return self.constant * k**self.degree * self.rate**k
        return self.constant * k ** (-self.rate)

    @property
    def summable(self) -> bool:
        if self.kind == "geometric":
            return 0.0 <= self.rate < 1.0
        if self.kind == "power":
            return self.rate > 1.0
        raise ValueError(f"unknown envelope kind {self.kind!r}")

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate, "constant": self.constant, "degree": self.degree}


@dataclass(frozen=True)
class VerticalNoiseSpec:
    modes: tuple = ()
    envelope: Envelope | None = None

    @property
    def K(self) -> int:
        return len(self.modes)

    def to_dict(self):
        d = {"modes": [m.to_dict() for m in self.modes]}
        if self.envelope is not None:
            d["envelope"] = self.envelope.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        env = d.get("envelope")
        return cls(
            tuple(ModeSpec.from_dict(m) for m in d.get("modes", [])),
            Envelope(**env) if env else None,
        )

    def profile_matrices(self, grid: Grid):
        """Amplitude-weighted profiles at the grid nodes, split by form, shape ``(K, n)``."""
        x = grid.x
        add = np.zeros((self.K, grid.n))
        mul = np.zeros((self.K, grid.n))
        for k, m in enumerate(self.modes):
            row = m.amplitude * m.profile(x)
            (mul if m.form == "multiplicative" else add)[k] = row
        return add, mul


@dataclass(frozen=True)
class NormalNoiseSpec:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= ALPHA_MAX + 1e-15:
            raise ValueError(f"alpha out of range: {self.alpha} not in [0, sqrt(2)]")


def geometric_family(K: int, form: str = "multiplicative") -> VerticalNoiseSpec:
    """Modes ``2^-k sin(k pi x)``, k = 1..K, with their summable envelope."""
    modes = tuple(ModeSpec(form, SineProfile(k, 2.0**-k)) for k in range(1, K + 1))
    # 4^-k (1 + k^2 pi^2) <= (1 + pi^2) k^2 4^-k
    return VerticalNoiseSpec(modes, Envelope("geometric", 0.25, 1.0 + math.pi**2, 2.0))


def mu_k(mode: ModeSpec, x_samples=None, r_range=(-100.0, 100.0), analytic_r: bool = True) -> float:
    """``sup |d_r g|^2 + sup (|d_x g| / (1 + |r|))^2``, x sampled on a fine grid.

    With ``analytic_r`` the supremum over ``r`` uses the closed form of the
    built-in forms: the additive quotient peaks at ``r = 0`` and the
    multiplicative quotient ``|r| / (1 + |r|)`` has supremum 1 without
    attaining it.  Otherwise ``r`` is restricted to ``r_range``.
    """
    if x_samples is None:
        x_samples = np.linspace(0.0, 1.0, 4097)
    x = np.asarray(x_samples, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one x sample")
    a2 = mode.amplitude**2
    p2 = float(np.max(mode.profile(x) ** 2))
    d2 = float(np.max(mode.profile.derivative(x) ** 2))
    lo, hi = float(r_range[0]), float(r_range[1])
    if mode.form == "additive":
        r_min = 0.0 if (analytic_r or lo <= 0.0 <= hi) else min(abs(lo), abs(hi))
        return a2 * d2 / (1.0 + r_min) ** 2
    r_max = max(abs(lo), abs(hi))
    q = 1.0 if analytic_r else r_max / (1.0 + r_max)
    return a2 * (p2 + d2 * q * q)


def check_trace_class(spec: VerticalNoiseSpec, x_samples=None) -> float:
    """Return ``sum_k mu_k``; reject families whose declared envelope is not summable."""
    if spec.envelope is not None:
        if not spec.envelope.summable:
            raise TraceClassError(f"declared envelope {spec.envelope} is not summable")
    mus = np.array([mu_k(m, x_samples) for m in spec.modes])
    if spec.envelope is not None and mus.size:
        bound = spec.envelope(np.arange(1, mus.size + 1))
        bad = np.nonzero(mus > bound * (1 + 1e-9))[0]
        if bad.size:
            raise TraceClassError(f"mu_k exceeds the declared envelope at k = {int(bad[0]) + 1}")
    return float(np.sum(mus))


def apply_vertical(spec: VerticalNoiseSpec, v: GridFunction, dbeta) -> GridFunction:
    """Nodewise ``sum_k g^k(x_i, v_i) * dbeta_k``."""
    dbeta = np.asarray(dbeta, dtype=float)
    if dbeta.shape != (spec.K,):
        raise ValueError(f"expected {spec.K} increments, got shape {dbeta.shape}")
    add, mul = spec.profile_matrices(v.grid)
    return v.with_values(dbeta @ add + (dbeta @ mul) * v.values)


def apply_normal(spec: NormalNoiseSpec, v: GridFunction, dbeta: float) -> GridFunction:
    """``alpha * sqrt(1 + a_i^2) * dbeta`` with the node-centred gradient ``a``."""
    if not v.grid.periodic:
        raise ValueError("normal noise is defined on periodic grids only")
    a = v.grid.node_grad(v.values)
    return v.with_values(spec.alpha * np.sqrt(1.0 + a * a) * float(dbeta))


# counter-based normals

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    """SplitMix64 finaliser on uint64 arrays."""
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def standard_normals(master_seed: int, stream_ids, step, modes):
    """N(0, 1) draws for the broadcast of ``(stream_ids, step, modes)``.

    The key is folded as ``mix(mix(mix(mix(seed) + stream) + step) + mode)``
    with golden-ratio offsets between stages; the top 53 bits give a uniform
    on (0, 1) that is mapped through the normal quantile function.
    """
    with np.errstate(over="ignore"):
        s = np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF)
        z = _mix(s + _GOLDEN)
        z = _mix(z + np.asarray(stream_ids, dtype=np.uint64) * _GOLDEN + np.uint64(1))
        z = _mix(z + np.asarray(step, dtype=np.uint64) * _GOLDEN + np.uint64(2))
        z = _mix(z + np.asarray(modes, dtype=np.uint64) * _GOLDEN + np.uint64(3))
    u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)
    return ndtri(u)


@dataclass(frozen=True)
class WienerSampler:
    master_seed: int
    stream_id: int = 0

    def increments(self, K: int, dt: float, step: int) -> np.ndarray:
        return sample_increments(self, K, dt, step)


def sample_increments(sampler: WienerSampler, K: int, dt: float, step: int) -> np.ndarray:
    """``K`` independent ``N(0, dt)`` draws for one stream and step."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    z = standard_normals(sampler.master_seed, sampler.stream_id, step, np.arange(K))
    return math.sqrt(dt) * np.asarray(z, dtype=float).reshape(K)
