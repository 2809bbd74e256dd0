"""scikit-learn style wrappers.

Each row of the input matrix is one grid function (node values, in grid
order).  The transformers are stateless apart from the grid fixed by
:meth:`fit`, so they compose with :class:`sklearn.pipeline.Pipeline` and
can be cloned.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .flux import FluxModel
from .grid import DIRICHLET, PERIODIC, Grid, GridFunction, galerkin_project
from .noise import geometric_family
from .stepper import DirichletVertical, PeriodicNormal, SimConfig, iterate_ensemble

__all__ = ["ResolventSmoother", "GalerkinProjector", "ViscousFlowSimulator"]


class _GridTransformer(TransformerMixin, BaseEstimator):
    def _fit_grid(self, X):
        X = check_array(X, dtype=np.float64)
        if self.bc not in (DIRICHLET, PERIODIC):
            raise ValueError(f"bc must be {DIRICHLET!r} or {PERIODIC!r}, got {self.bc!r}")
        self.grid_ = Grid(self.bc, X.shape[1])
        self.n_features_in_ = X.shape[1]
        return X

    def _check(self, X):
        check_is_fitted(self, "grid_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} nodes, the transformer was fitted with {self.n_features_in_}")
        return X


class ResolventSmoother(_GridTransformer):
    """Apply ``(I - lam * Laplacian)^{-1}`` to every row.

    Parameters
    ----------
    lam : float
        Resolvent parameter, positive.
    bc : {"dirichlet", "periodic"}
    """

    def __init__(self, lam=1e-2, bc=PERIODIC):
        self.lam = lam
        self.bc = bc

    def fit(self, X, y=None):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        self._fit_grid(X)
        return self

    def transform(self, X):
        X = self._check(X)
        return self.grid_.solver(float(self.lam)).solve(X)


class GalerkinProjector(_GridTransformer):
    """Project every row onto the ``n_modes`` lowest discrete Laplacian eigenmodes."""

    def __init__(self, n_modes=8, bc=DIRICHLET):
        self.n_modes = n_modes
        self.bc = bc

    def fit(self, X, y=None):
        X = self._fit_grid(X)
        if not 1 <= self.n_modes <= X.shape[1]:
            raise ValueError(f"n_modes must lie in [1, {X.shape[1]}]")
        return self

    def transform(self, X):
        X = self._check(X)
        return np.stack([galerkin_project(GridFunction(self.grid_, row), self.n_modes).values for row in X])


class ViscousFlowSimulator(_GridTransformer):
    """Evolve every row to time ``T``; row ``i`` uses noise stream ``i``.

    Parameters
    ----------
    flux : dict
        Flux model in the configuration format, e.g. ``{"kind": "mean_curvature"}``.
    bc : {"dirichlet", "periodic"}
        Dirichlet selects vertical noise (``noise_modes`` geometric modes),
        periodic selects normal noise of intensity ``alpha``.
    eps, alpha, dt, T : float
    noise_modes : int
    seed : int
    """

    def __init__(self, flux=None, bc=DIRICHLET, eps=0.0, alpha=0.0, dt=1e-4, T=1e-2, noise_modes=0, seed=0):
        self.flux = flux
        self.bc = bc
        self.eps = eps
        self.alpha = alpha
        self.dt = dt
        self.T = T
        self.noise_modes = noise_modes
        self.seed = seed

    def fit(self, X, y=None):
        X = self._fit_grid(X)
        model = FluxModel.from_dict(self.flux or {"kind": "mean_curvature"})
        if self.bc == DIRICHLET:
            prob = DirichletVertical(model, geometric_family(int(self.noise_modes)))
        else:
            prob = PeriodicNormal(float(self.alpha), model)
        self.sim_config_ = SimConfig(prob, n=X.shape[1], dt=float(self.dt), T=float(self.T), eps=float(self.eps))
        return self

    def transform(self, X):
        X = self._check(X)
        check_is_fitted(self, "sim_config_")
        final = X
        for _, _, S in iterate_ensemble(self.sim_config_, X, int(self.seed), np.arange(X.shape[0])):
            final = S
        return final.copy()
