"""Cadzow plug-and-play gradient descent (CPGD).

The Fourier coefficients ``m_hat[-M..M]`` of the Dirac stream are estimated
by proximal gradient descent on ``||G z - y||^2`` where the proximal step is
a Cadzow-style alternating projection onto low-rank Toeplitz matrices.  Knots
follow from the annihilating filter of the estimate, weights from a
fixed-knot LASSO.
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fista import FistaConfig, WEIGHT_THRESHOLD, _rrse, fista_solve, largest_eigenvalue
from .operators import FourierSymbol
from .report import SolverReport
from .sampling import SampleSet, SparseMeasure, matrix_G, matrix_H

logger = logging.getLogger(__name__)

MAP_EARLY_EXIT = 1e-10
ROOT_BAND = 0.5


@dataclass(frozen=True)
class CpgdConfig:
    """``K`` spikes, Toeplitz width ``P`` and Fourier order ``M``, with
    ``1 <= K <= P <= M``."""

    K: int
    P: int
    M: int
    epsilon: float = 1e-4
    max_iter: int = 1000
    map_iters: int = 20

    def __post_init__(self):
        if not 1 <= self.K <= self.P <= self.M:
            raise ValueError(f"need 1 <= K <= P <= M, got K={self.K}, P={self.P}, M={self.M}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1 or self.map_iters < 0:
            raise ValueError("invalid iteration counts")

    @classmethod
    def full(cls, M: int, **kwargs) -> "CpgdConfig":
        """``K = P = M``: leave model-order selection to the weighting LASSO."""
        return cls(K=M, P=M, M=M, **kwargs)


@dataclass
class FourierEstimate:
    coeffs: np.ndarray
    iterations: int = 0
    converged: bool = False

    @property
    def M(self) -> int:
        return (self.coeffs.size - 1) // 2


def _order(v) -> int:
    v = np.asarray(v)
    if v.ndim != 1 or v.size % 2 == 0:
        raise ValueError("coefficient vector must have odd length 2M+1")
    return (v.size - 1) // 2


def toeplitzify(v, P: int) -> np.ndarray:
    """``T_P(v)[i, j] = v[-M + P + i - j]`` (1-based), shape ``(2M-P+1, P+1)``."""
    v = np.asarray(v)
    M = _order(v)
    if not 0 <= P <= M:
        raise ValueError(f"need 0 <= P <= M, got P={P}, M={M}")
    rows = 2 * M - P + 1
    # array index of v[-M + P + i - j] with 0-based i, j is P + i - j
    idx = P + np.arange(rows)[:, None] - np.arange(P + 1)[None, :]
    return v[idx]


def gamma_diag(M: int, P: int) -> np.ndarray:
    """Multiplicity ``min(i, P+1, 2M+2-i)`` of each coefficient in ``T_P``."""
    if not 0 <= P <= M:
        raise ValueError(f"need 0 <= P <= M, got P={P}, M={M}")
    i = np.arange(1, 2 * M + 2)
    return np.minimum(np.minimum(i, P + 1), 2 * M + 2 - i)


def toeplitz_pinv(X) -> np.ndarray:
    """Left inverse ``Gamma^{-1} T_P^*``: average along each diagonal."""
    X = np.asarray(X)
    rows, cols = X.shape
    P = cols - 1
    M2 = rows + P - 1  # 2M
    if M2 % 2 or P > M2 // 2:
        raise ValueError("matrix shape does not match any (M, P)")
    M = M2 // 2
    # coefficient index of entry (i, j) is P + i - j
    idx = (P + np.arange(rows)[:, None] - np.arange(cols)[None, :]).ravel()
    flat = X.ravel()
    out = np.bincount(idx, flat.real, 2 * M + 1)
    if np.iscomplexobj(X):
        out = out + 1j * np.bincount(idx, flat.imag, 2 * M + 1)
    return out / gamma_diag(M, P)


def project_toeplitz(X) -> np.ndarray:
    X = np.asarray(X)
    return toeplitzify(toeplitz_pinv(X), X.shape[1] - 1)


def project_rank(X, K: int) -> np.ndarray:
    """Best rank-``K`` approximation in Frobenius norm (truncated SVD)."""
    if K < 0:
        raise ValueError("K must be non-negative")
    X = np.asarray(X)
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    if K >= s.size:
        return X.copy()
    return (U[:, :K] * s[:K]) @ Vh[:K, :]


def map_project(v, K: int, P: int, iters: int = 20) -> np.ndarray:
    """Alternating projections between rank-``K`` and Toeplitz matrices,
    returned in coefficient form."""
    v = np.asarray(v, dtype=complex)
    M = _order(v)
    if not K <= P <= M:
        raise ValueError(f"need K <= P <= M, got K={K}, P={P}, M={M}")
    current = v.copy()
    for _ in range(iters):
        nxt = toeplitz_pinv(project_rank(toeplitzify(current, P), K))
        step = np.linalg.norm(nxt - current)
        current = nxt
        if step <= MAP_EARLY_EXIT * max(1.0, np.linalg.norm(current)):
            break
    return current


def cpgd_solve(samples: SampleSet, G, config: CpgdConfig,
               initial: Optional[np.ndarray] = None) -> FourierEstimate:
    """Proximal gradient on the Fourier coefficients with the Cadzow prox."""
    G = np.asarray(G, dtype=complex)
    y = np.asarray(samples.values, dtype=float)
    if G.shape != (y.size, 2 * config.M + 1):
        raise ValueError("G must be L x (2M+1)")
    x = np.zeros(G.shape[1], dtype=complex) if initial is None \
        else np.asarray(initial, dtype=complex).copy()
    if not np.any(y) and not np.any(x):
        return FourierEstimate(x, 1, True)
    tau = 1.0 / (2.0 * largest_eigenvalue(G))
    GhG = G.conj().T @ G
    Ghy = G.conj().T @ y
    converged = False
    n = 0
    for n in range(1, config.max_iter + 1):
        z = x - 2 * tau * (GhG @ x - Ghy)
        x_new = map_project(z, config.K, config.P, config.map_iters)
        diff = np.linalg.norm(x_new - x)
        ref = np.linalg.norm(x)
        x = x_new
        if (ref == 0 and diff == 0) or (ref > 0 and diff <= config.epsilon * ref):
            converged = True
            break
    return FourierEstimate(x, n, converged)


@dataclass
class AnnihilatingFilter:
    h: np.ndarray
    residual: float
    ambiguous: bool


def annihilating_filter(est, K: int) -> AnnihilatingFilter:
    """Unit-norm ``h`` minimising ``||T_K(m_hat) h||`` (total least squares)."""
    coeffs = est.coeffs if isinstance(est, FourierEstimate) else np.asarray(est)
    M = _order(coeffs)
    if K > M:
        raise ValueError(f"need M >= K, got M={M}, K={K}")
    T = toeplitzify(np.asarray(coeffs, dtype=complex), K)
    _, s, Vh = np.linalg.svd(T, full_matrices=True)
    h = Vh[-1].conj()
    sv = np.zeros(K + 1)
    sv[:s.size] = s
    smallest = np.sort(sv)
    scale = max(smallest[-1], np.finfo(float).tiny)
    ambiguous = bool(K >= 1 and smallest[1] - smallest[0] <= 1e-12 * scale) or not np.any(coeffs)
    return AnnihilatingFilter(h, float(np.linalg.norm(T @ h)), ambiguous)


def knots_from_filter(h, T: float) -> np.ndarray:
    """Knots ``t = -T arg(u) / 2pi mod T`` from the roots ``u`` of
    ``sum_k h_k z^(K-k)``; roots far from the unit circle are dropped."""
    h = np.asarray(h, dtype=complex).ravel()
    if not np.any(h):
        raise ValueError("filter is identically zero")
    scale = np.max(np.abs(h))
    first = int(np.argmax(np.abs(h) > 1e-12 * scale))
    roots = np.roots(h[first:])
    keep = np.abs(np.abs(roots) - 1) <= ROOT_BAND
    if not np.all(keep):
        warnings.warn(f"discarding {int((~keep).sum())} root(s) far from the unit circle",
                      RuntimeWarning, stacklevel=2)
    knots = np.mod(-T * np.angle(roots[keep]) / (2 * np.pi), T)
    return np.sort(knots)


def cpgd_reconstruct(samples: SampleSet, green, symbol: FourierSymbol, config: CpgdConfig,
                     fista_cfg: FistaConfig, sigma: Optional[float] = None):
    """End-to-end CPGD: Fourier estimate, annihilating filter, knots, LASSO weights.

    With ``sigma`` set, the weighting LASSO uses ``lambda = sigma ||H^T y||_inf``
    on the recovered knots; otherwise ``fista_cfg.lam`` is used as is.
    """
    period = samples.period
    spec = green.spec
    y = samples.values
    start = time.perf_counter()
    G = matrix_G(samples.positions, config.M, symbol, spec)
    est = cpgd_solve(samples, G, config)
    knots = np.zeros(0)
    if np.any(est.coeffs):
        filt = annihilating_filter(est, config.K)
        if filt.ambiguous:
            logger.warning("annihilating filter is ambiguous (degenerate singular values)")
        knots = knots_from_filter(filt.h, period)
    if knots.size == 0:
        duration = time.perf_counter() - start
        report = SolverReport(factor=np.nan if sigma is None else sigma,
                              iterations=est.iterations, duration_s=duration,
                              converged=False, objective=float(y @ y),
                              samples_rrse=_rrse(y, y), sparsity=0, lam=fista_cfg.lam)
        return SparseMeasure.empty(period), report

    H = matrix_H(samples.positions, knots, green, period)
    lam = fista_cfg.lam
    if sigma is not None:
        base = float(np.max(np.abs(H.T @ y)))
        lam = sigma * base if base > 0 else sigma
    result = fista_solve(H, y, fista_cfg.with_lambda(lam))
    duration = time.perf_counter() - start
    keep = np.abs(result.weights) > WEIGHT_THRESHOLD
    measure = SparseMeasure(knots[keep], result.weights[keep], period)
    resid = y - H @ result.weights
    report = SolverReport(
        factor=np.nan if sigma is None else sigma, iterations=est.iterations,
        duration_s=duration, converged=est.converged and result.converged,
        objective=result.objective, samples_rrse=_rrse(resid, y),
        sparsity=int(keep.sum()), lam=lam)
    return measure, report
