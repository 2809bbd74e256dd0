"""Scalar convex potentials of linear growth and their derivatives.

A :class:`FluxModel` bundles a potential ``psi`` with ``psi(0) = 0``, its
derivative ``phi = psi'`` (the flux) and ``phi'``.  All evaluators are
vectorised over numpy arrays and return plain floats for scalar input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FluxModel",
    "GrowthReport",
    "UnsupportedModelError",
    "mean_curvature",
    "minimal_surface",
    "newtonian",
    "linear",
    "scaled_mean_curvature",
    "eval_potential",
    "eval_flux",
    "eval_flux_derivative",
    "recession",
    "numeric_recession",
    "validate_growth",
]

KINDS = ("mean_curvature", "minimal_surface", "newtonian", "linear", "scaled_mean_curvature")
LINEAR_GROWTH_KINDS = ("mean_curvature", "minimal_surface", "scaled_mean_curvature")


class UnsupportedModelError(ValueError):
    """Raised when an operation needs linear growth and the model lacks it."""


@dataclass(frozen=True)
class FluxModel:
    """Nonlinearity ``coef * psi`` with flux ``coef * phi``.

    Parameters
    ----------
    kind : str
        One of ``mean_curvature``, ``minimal_surface``, ``newtonian``,
        ``linear`` or ``scaled_mean_curvature``.
    coef : float
        Multiplier applied to ``psi``, ``phi`` and ``phi'``.
    eps_reg : float
        Regularisation of the minimal surface potential ``sqrt(eps + xi^2)``.
    p : float
        Exponent of the Newtonian potential, in ``(1, 2)``.
    growth_c, growth_C : float
        Constants used by :func:`validate_growth` to count violations.
    """

    kind: str = "mean_curvature"
    coef: float = 1.0
    eps_reg: float = 1.0
    p: float = 1.5
    growth_c: float | None = None
    growth_C: float = 2.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown flux kind {self.kind!r}; expected one of {KINDS}")
        if not math.isfinite(self.coef) or self.coef < 0:
            raise ValueError("coef must be a finite nonnegative number")
        if self.kind == "scaled_mean_curvature" and not 0.0 <= self.coef <= 1.0:
            raise ValueError("scaled_mean_curvature requires coef in [0, 1]")
        if self.kind == "minimal_surface" and not self.eps_reg > 0:
            raise ValueError("minimal_surface requires eps_reg > 0")
        if self.kind == "newtonian" and not 1.0 < self.p < 2.0:
            raise ValueError("newtonian requires p in (1, 2)")
        if self.growth_c is None:
            object.__setattr__(self, "growth_c", 0.5 * self.coef)
        if self.growth_c < 0 or self.growth_C < 0:
            raise ValueError("growth constants must be nonnegative")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def has_linear_growth(self) -> bool:
        return self.kind in LINEAR_GROWTH_KINDS

    def potential(self, xi):
        xi = _finite(xi)
        k = self.kind
        if k in ("mean_curvature", "scaled_mean_curvature"):
            out = xi * np.arctan(xi) - 0.5 * np.log1p(xi * xi)
        elif k == "minimal_surface":
            # sqrt(eps + xi^2) - sqrt(eps), written without cancellation
            out = xi * xi / (np.sqrt(self.eps_reg + xi * xi) + np.sqrt(self.eps_reg))
        elif k == "newtonian":
            out = np.expm1(0.5 * self.p * np.log1p(xi * xi)) / self.p
        else:
            out = 0.5 * xi * xi
        return _ret(self.coef * out)

    def flux(self, xi):
        xi = _finite(xi)
        k = self.kind
        if k in ("mean_curvature", "scaled_mean_curvature"):
            out = np.arctan(xi)
        elif k == "minimal_surface":
            out = xi / np.sqrt(self.eps_reg + xi * xi)
        elif k == "newtonian":
            out = (1.0 + xi * xi) ** (0.5 * (self.p - 2.0)) * xi
        else:
            out = xi.copy()
        return _ret(self.coef * out)

    def flux_derivative(self, xi):
        xi = _finite(xi)
        k = self.kind
        if k in ("mean_curvature", "scaled_mean_curvature"):
            out = 1.0 / (1.0 + xi * xi)
        elif k == "minimal_surface":
            out = self.eps_reg / (self.eps_reg + xi * xi) ** 1.5
        elif k == "newtonian":
            s = 1.0 + xi * xi
            out = s ** (0.5 * (self.p - 2.0)) * ((self.p - 2.0) * xi * xi / s + 1.0)
        else:
            out = np.ones_like(xi)
        return _ret(self.coef * out)

    @property
    def max_flux_derivative(self) -> float:
        """``sup |phi'|``, attained at the origin for every built-in kind."""
        if self.kind == "minimal_surface":
            return self.coef / math.sqrt(self.eps_reg)
        return self.coef

    @property
    def flux_bound(self) -> float:
        """``sup |phi|``; infinite for kinds without linear growth."""
        if self.kind in ("mean_curvature", "scaled_mean_curvature"):
            return self.coef * math.pi / 2
        if self.kind == "minimal_surface":
            return self.coef
        return math.inf

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "coef": self.coef}
        if self.kind == "minimal_surface":
            d["eps_reg"] = self.eps_reg
        if self.kind == "newtonian":
            d["p"] = self.p
        d["growth_c"] = self.growth_c
        d["growth_C"] = self.growth_C
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FluxModel":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def _finite(xi):
    arr = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("flux models are only defined for finite arguments")
    return arr


def _ret(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def mean_curvature(coef: float = 1.0) -> FluxModel:
    return FluxModel("mean_curvature", coef=coef)


def scaled_mean_curvature(coef: float) -> FluxModel:
    return FluxModel("scaled_mean_curvature", coef=coef)


def minimal_surface(eps_reg: float = 1.0, coef: float = 1.0) -> FluxModel:
    return FluxModel("minimal_surface", coef=coef, eps_reg=eps_reg)


def newtonian(p: float = 1.5, coef: float = 1.0) -> FluxModel:
    return FluxModel("newtonian", coef=coef, p=p)


def linear(coef: float = 1.0) -> FluxModel:
    """Quadratic potential (heat equation); kept as a validation oracle."""
    return FluxModel("linear", coef=coef)


def eval_potential(model: FluxModel, xi):
    return model.potential(xi)


def eval_flux(model: FluxModel, xi):
    return model.flux(xi)


def eval_flux_derivative(model: FluxModel, xi):
    return model.flux_derivative(xi)


def recession(model: FluxModel, xi):
    """One-homogeneous large-slope limit ``lim_{t->0} t * psi(xi / t)``."""
    if not model.has_linear_growth:
        raise UnsupportedModelError(f"{model.kind} is not of linear growth; no recession function")
    xi = _finite(xi)
    if model.kind == "minimal_surface":
        return _ret(model.coef * np.abs(xi))
    return _ret(model.coef * 0.5 * np.pi * np.abs(xi))


def numeric_recession(potential, xi: float, tol: float = 1e-10, max_halvings: int = 80) -> float:
    """Recession value of an arbitrary potential by halving ``t`` until it settles.

    Used for user supplied potentials and as a cross-check of the closed forms.
    """
    prev = float(potential(xi))
    for k in range(1, max_halvings + 1):
        t = 2.0 ** -k
        cur = t * potential(xi / t)
        if abs(cur - prev) < tol:
            return float(cur)
        prev = cur
    raise ArithmeticError(f"recession quotient did not settle within {max_halvings} halvings")


@dataclass
class GrowthReport:
    fitted_c: float
    fitted_C: float
    sample_range: tuple[float, float]
    violations: int
    per_family: dict[str, int]
    linear_growth: bool

    @property
    def ok(self) -> bool:
        return self.violations == 0


def validate_growth(model: FluxModel, range=(-100.0, 100.0), n_samples: int = 10_000) -> GrowthReport:
    """Check the three growth inequalities on ``n_samples`` points of ``range``.

    Violations are counted against ``model.growth_c`` and ``model.growth_C``;
    the fitted constants are the smallest ``C`` satisfying the two upper
    bounds and the largest ``c`` compatible with it on the sample.
    Kinds without linear growth are flagged, not rejected.
    """
    lo, hi = float(range[0]), float(range[1])
    if not hi > lo:
        raise ValueError("sample range must be nondegenerate")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    xi = np.linspace(lo, hi, n_samples)
    psi = np.asarray(model.potential(xi))
    phi = np.asarray(model.flux(xi))
    dphi = np.abs(np.asarray(model.flux_derivative(xi)))
    a = np.abs(xi)
    c, C = model.growth_c, model.growth_C
    # relative slack for rounding in the sampled comparisons
    slack = 1e-12 * (1.0 + np.abs(psi) + a)

    fam = {
        "linear_growth": int(np.sum((c * a - C > psi + slack) | (psi > C * (1.0 + a) + slack))),
        "coercivity": int(np.sum(c * psi - C > phi * xi + slack)),
        "hessian": int(np.sum(dphi * xi * xi > C * (1.0 + psi) + slack)),
    }

    C_fit = float(max(np.max(psi / (1.0 + a)), np.max(dphi * xi * xi / (1.0 + psi)), 0.0))
    nz = a > 0
    cands = [np.min((psi[nz] + C_fit) / a[nz])] if np.any(nz) else []
    pos = psi > 0
    if np.any(pos):
        cands.append(np.min((phi[pos] * xi[pos] + C_fit) / psi[pos]))
    c_fit = float(min(cands)) if cands else math.inf

    return GrowthReport(
        fitted_c=c_fit,
        fitted_C=C_fit,
        sample_range=(lo, hi),
        violations=sum(fam.values()),
        per_family=fam,
        linear_growth=model.has_linear_growth,
    )
