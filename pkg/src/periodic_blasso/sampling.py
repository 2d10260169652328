"""Spatial sampling of periodic splines: forward/adjoint maps, measurement
matrices, synthetic measures and the noise model."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .operators import FourierSymbol, OperatorSpec

Green = Callable[[np.ndarray], np.ndarray]


def torus_distance(a, b, period: float) -> np.ndarray:
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), period)
    return np.minimum(d, period - d)


@dataclass(frozen=True)
class SparseMeasure:
    """Finite Dirac stream ``sum_k w_k Sha(. - t_k)`` on ``[0, period)``.

    Knots are reduced modulo the period and sorted; repeated knots are merged
    by summing their weights.
    """

    knots: np.ndarray
    weights: np.ndarray
    period: float = 2 * math.pi

    def __post_init__(self):
        knots = np.mod(np.asarray(self.knots, dtype=float).ravel(), self.period)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if knots.shape != weights.shape:
            raise ValueError("knots and weights must have the same length")
        # mod can return `period` itself for tiny negative inputs
        knots[knots >= self.period] = 0.0
        order = np.argsort(knots, kind="stable")
        knots, weights = knots[order], weights[order]
        if knots.size > 1 and np.any(np.diff(knots) == 0):
            uniq, inverse = np.unique(knots, return_inverse=True)
            weights = np.bincount(inverse, weights=weights, minlength=uniq.size)
            knots = uniq
        knots.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def empty(cls, period: float = 2 * math.pi) -> "SparseMeasure":
        return cls(np.zeros(0), np.zeros(0), period)

    def __len__(self):
        return self.knots.size

    @property
    def tv_norm(self) -> float:
        return float(np.abs(self.weights).sum())

    def pruned(self, threshold: float = 1e-10) -> "SparseMeasure":
        keep = np.abs(self.weights) > threshold
        return SparseMeasure(self.knots[keep], self.weights[keep], self.period)

    def shifted(self, s: float) -> "SparseMeasure":
        return SparseMeasure(self.knots + s, self.weights, self.period)

    def spline(self, green: Green, t) -> np.ndarray:
        """Evaluate ``sum_k w_k psi(t - t_k)``."""
        t = np.asarray(t, dtype=float)
        if len(self) == 0:
            return np.zeros(t.shape)
        return matrix_H(t.ravel(), self.knots, green, self.period).dot(self.weights).reshape(t.shape)

    def fourier_coefficients(self, M: int) -> np.ndarray:
        """``m_hat[n] = sum_k w_k exp(-2j pi n t_k / T)`` for ``n = -M..M``."""
        n = np.arange(-M, M + 1)
        return np.exp(-2j * np.pi * np.outer(n, self.knots) / self.period) @ self.weights

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["knot", "weight"])
        for k, w in zip(self.knots, self.weights):
            writer.writerow([repr(float(k)), repr(float(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, period: float = 2 * math.pi) -> "SparseMeasure":
        rows = _read_two_columns(text, ("knot", "weight"))
        return cls(rows[:, 0], rows[:, 1], period)


@dataclass(frozen=True)
class SampleSet:
    positions: np.ndarray
    values: np.ndarray
    period: float = 2 * math.pi

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).ravel()
        val = np.asarray(self.values, dtype=float).ravel()
        if pos.size < 1:
            raise ValueError("at least one sample is required")
        if pos.shape != val.shape:
            raise ValueError("positions and values must have the same length")
        if np.unique(np.mod(pos, self.period)).size != pos.size:
            raise ValueError("sampling positions must be pairwise distinct")
        pos.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", val)

    def __len__(self):
        return self.positions.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["theta", "y"])
        for p, v in zip(self.positions, self.values):
            writer.writerow([repr(float(p)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, period: float = 2 * math.pi) -> "SampleSet":
        rows = _read_two_columns(text, ("theta", "y"))
        return cls(rows[:, 0], rows[:, 1], period)


def _read_two_columns(text: str, header: tuple) -> np.ndarray:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and not r[0].startswith("#")]
    if not rows or tuple(c.strip() for c in rows[0]) != header:
        raise ValueError(f"expected CSV header {','.join(header)!r}")
    data = [[float(c) for c in r] for r in rows[1:]]
    return np.array(data, dtype=float).reshape(-1, 2)


def matrix_H(positions, knots, green: Green, period: Optional[float] = None) -> np.ndarray:
    """``H[l, i] = psi(theta_l - k_i)`` with the shift reduced modulo the period."""
    period = green.period if period is None else period
    positions = np.asarray(positions, dtype=float).ravel()
    knots = np.asarray(knots, dtype=float).ravel()
    shifts = np.mod(positions[:, None] - knots[None, :], period)
    return np.asarray(green(shifts), dtype=float).reshape(positions.size, knots.size)


def matrix_G(positions, M: int, symbol: FourierSymbol, spec: OperatorSpec) -> np.ndarray:
    """``G[l, n] = psi_hat[n] e_n(theta_l)`` for ``n = -M..M``.

    Built as ``Diag(e_{-M}(theta)) @ Vand(e_1(theta)) @ Diag(psi_hat)``.
    """
    if M > symbol.cutoff:
        raise ValueError(f"M={M} exceeds the symbol cutoff {symbol.cutoff}")
    positions = np.asarray(positions, dtype=float).ravel()
    psi_hat = symbol.green_coefficients(spec.period, M)
    e1 = np.exp(2j * np.pi * positions / spec.period)
    vand = np.vander(e1, 2 * M + 1, increasing=True)
    return (e1 ** -M)[:, None] * vand * psi_hat[None, :]


def forward(m: SparseMeasure, positions, green: Green) -> np.ndarray:
    positions = np.asarray(positions, dtype=float).ravel()
    if len(m) == 0:
        return np.zeros(positions.size)
    return matrix_H(positions, m.knots, green, m.period) @ m.weights


def adjoint_eval(p, positions, green: Green, t):
    """``sum_l p_l psi(theta_l - t)``; vectorised over ``t``."""
    p = np.asarray(p, dtype=float).ravel()
    t = np.asarray(t, dtype=float)
    H = matrix_H(positions, t.ravel(), green)
    out = p @ H
    return out.reshape(t.shape) if t.ndim else float(out[0])


def random_sparse_measure(K0: int, rng_seed: int, T: float = 2 * math.pi) -> SparseMeasure:
    """Uniform knots and standard normal weights, reproducible from the seed."""
    if K0 < 1:
        raise ValueError("K0 must be >= 1")
    rng = np.random.default_rng(rng_seed)
    knots = rng.uniform(0, T, K0)
    while np.unique(knots).size < K0:
        knots = rng.uniform(0, T, K0)
    weights = rng.standard_normal(K0)
    return SparseMeasure(knots, weights, T)


def sample_positions(L: int, rng_seed: int, T: float = 2 * math.pi,
                     mode: str = "random") -> np.ndarray:
    """Sampling positions on ``[0, T)``: i.i.d. uniform or equispaced."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if mode == "equispaced":
        return np.arange(L) * T / L
    if mode != "random":
        raise ValueError(f"unknown sampling mode {mode!r}")
    rng = np.random.default_rng(rng_seed)
    pos = np.sort(rng.uniform(0, T, L))
    while np.unique(pos).size < L:
        pos = np.sort(rng.uniform(0, T, L))
    return pos


def noise_level(clean, psnr_db: float) -> float:
    """Noise standard deviation ``max|clean| * exp(-psnr/10)``.

    This is the natural-exponential convention, not ``10**(-psnr/20)``.
    """
    clean = np.asarray(clean, dtype=float)
    return float(np.max(np.abs(clean)) * math.exp(-psnr_db / 10))


def add_noise(clean, psnr_db: float, rng_seed: int) -> np.ndarray:
    clean = np.asarray(clean, dtype=float)
    if clean.size == 0:
        raise ValueError("clean signal is empty")
    omega = noise_level(clean, psnr_db)
    if omega == 0:
        return clean.copy()
    rng = np.random.default_rng(rng_seed)
    return clean + rng.normal(0.0, omega, clean.shape)
