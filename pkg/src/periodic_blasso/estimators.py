"""Scikit-learn style estimators.

Each regressor is fitted on sampling positions ``X`` (shape ``(L,)`` or
``(L, 1)``) and measured values ``y``; ``predict`` evaluates the
reconstructed periodic spline at new positions.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .cpgd import CpgdConfig, cpgd_reconstruct
from .fista import FistaConfig, grid_reconstruct
from .frank_wolfe import FwConfig, Variant, fw_solve, lambda_base_fw
from .operators import DEFAULT_CUTOFF, GreensFunction, OperatorSpec
from .sampling import SampleSet


def _as_positions(X) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    X = check_array(X, dtype=float)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single column of positions, got {X.shape[1]}")
    return X[:, 0]


class _PeriodicSplineRegressor(RegressorMixin, BaseEstimator):
    """Shared fitting plumbing; subclasses implement ``_solve``."""

    def _green(self):
        spec = self.operator if isinstance(self.operator, OperatorSpec) \
            else OperatorSpec.parse(self.operator, self.period)
        if spec.period != self.period:
            raise ValueError("operator period differs from the estimator period")
        return GreensFunction(spec, self.cutoff)

    def _check_common(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.period > 0:
            raise ValueError("period must be positive")

    def fit(self, X, y):
        self._check_common()
        X = np.asarray(X)
        X, y = check_X_y(X[:, None] if X.ndim == 1 else X, y, dtype=float, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single column of positions, got {X.shape[1]}")
        samples = SampleSet(np.mod(X[:, 0], self.period), y, self.period)
        green = self._green()
        measure, report = self._solve(samples, green)
        self.green_ = green
        self.measure_ = measure
        self.knots_ = measure.knots
        self.weights_ = measure.weights
        self.report_ = report
        self.lambda_ = report.lam
        self.n_iter_ = report.iterations
        self.converged_ = report.converged
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "measure_")
        return self.measure_.spline(self.green_, _as_positions(X))


class GridLassoRegressor(_PeriodicSplineRegressor):
    """LASSO over ``grid_n`` equispaced knots, solved with FISTA."""

    def __init__(self, operator="exponential:3:2", sigma=0.1, grid_n=1024,
                 period=2 * math.pi, cutoff=DEFAULT_CUTOFF, delta=75.0, tol=1e-4,
                 max_iter=2000):
        self.operator = operator
        self.sigma = sigma
        self.grid_n = grid_n
        self.period = period
        self.cutoff = cutoff
        self.delta = delta
        self.tol = tol
        self.max_iter = max_iter

    def _solve(self, samples, green):
        cfg = FistaConfig(1.0, self.delta, self.tol, self.max_iter)
        return grid_reconstruct(samples, green, self.grid_n, self.sigma, cfg)


class CpgdRegressor(_PeriodicSplineRegressor):
    """Low-rank Fourier estimate, annihilating filter, then LASSO weights.

    ``n_spikes`` and ``width`` default to ``order`` (the largest model)."""

    def __init__(self, operator="exponential:3:2", sigma=0.1, order=16, n_spikes=None,
                 width=None, period=2 * math.pi, cutoff=DEFAULT_CUTOFF, tol=1e-4,
                 max_iter=1000, map_iters=20):
        self.operator = operator
        self.sigma = sigma
        self.order = order
        self.n_spikes = n_spikes
        self.width = width
        self.period = period
        self.cutoff = cutoff
        self.tol = tol
        self.max_iter = max_iter
        self.map_iters = map_iters

    def _solve(self, samples, green):
        K = self.order if self.n_spikes is None else self.n_spikes
        P = self.order if self.width is None else self.width
        cfg = CpgdConfig(K, P, self.order, self.tol, self.max_iter, self.map_iters)
        return cpgd_reconstruct(samples, green, green.symbol, cfg, FistaConfig(1.0),
                                sigma=self.sigma)


class FrankWolfeRegressor(_PeriodicSplineRegressor):
    """Gridless Frank-Wolfe; ``reweighted=True`` re-solves all weights after
    each new atom."""

    def __init__(self, operator="exponential:3:2", sigma=0.1, reweighted=False, nu=1e-2,
                 grid_points=4096, period=2 * math.pi, cutoff=DEFAULT_CUTOFF, max_iter=500):
        self.operator = operator
        self.sigma = sigma
        self.reweighted = reweighted
        self.nu = nu
        self.grid_points = grid_points
        self.period = period
        self.cutoff = cutoff
        self.max_iter = max_iter

    def _solve(self, samples, green):
        base = lambda_base_fw(samples, green, self.grid_points)
        lam = self.sigma * base if base > 0 else self.sigma
        variant = Variant.REWEIGHTED if self.reweighted else Variant.REGULAR
        cfg = FwConfig(lam, self.nu, self.max_iter, self.grid_points, variant)
        measure, report = fw_solve(samples, green, cfg)
        report.factor = self.sigma
        return measure, report
