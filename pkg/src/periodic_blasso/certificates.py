"""Post-hoc analysis of dual certificates.

A certificate ``eta`` is any continuous periodic function with
``||eta||_inf <= 1``; the points where it touches +-1 constrain the signed
support of every solution.  This module extracts those points, bounds their
number and tests the rank condition that makes the solution unique.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .sampling import SampleSet, SparseMeasure, forward, matrix_H

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class SaturationSet:
    """Signed saturation points, sorted by location.

    ``plateau[i]`` marks points that are endpoints of a saturated interval
    rather than isolated extrema.
    """

    t: np.ndarray
    sign: np.ndarray
    tolerance: float
    plateau: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        sign = np.asarray(self.sign, dtype=int).ravel()
        plateau = np.zeros(t.size, bool) if self.plateau is None \
            else np.asarray(self.plateau, bool).ravel()
        order = np.argsort(t, kind="stable")
        object.__setattr__(self, "t", t[order])
        object.__setattr__(self, "sign", sign[order])
        object.__setattr__(self, "plateau", plateau[order])

    def __len__(self):
        return self.t.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["tau", "sign"])
        for t, s in zip(self.t, self.sign):
            writer.writerow([repr(float(t)), int(s)])
        return buf.getvalue()


def empirical_certificate(measure: SparseMeasure, samples: SampleSet, green,
                          lam: float) -> Callable:
    """``t -> (2/lam) sum_l (y_l - (Phi m)_l) psi(theta_l - t)``, vectorised."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    r = samples.values - forward(measure, samples.positions, green)
    pos, period = samples.positions, samples.period

    def eta(t):
        t = np.asarray(t, dtype=float)
        out = (2.0 / lam) * (r @ matrix_H(pos, t.ravel(), green, period))
        return out.reshape(t.shape) if t.ndim else float(out[0])

    return eta


def _regions(mask: np.ndarray):
    """Circular runs of True in ``mask`` as lists of indices."""
    n = mask.size
    if mask.all():
        return [np.arange(n)]
    start = int(np.argmin(mask))  # a False entry, so no run wraps past it
    rolled = np.roll(mask, -start)
    runs, current = [], []
    for i, flag in enumerate(rolled):
        if flag:
            current.append((i + start) % n)
        elif current:
            runs.append(np.array(current))
            current = []
    if current:
        runs.append(np.array(current))
    return runs


def saturation_points(eta: Callable, grid_points: int = 4096, tol: float = 1e-6,
                      period: float = 2 * math.pi, plateau_cells: int = 8) -> SaturationSet:
    """Points where ``|eta|`` reaches 1 within ``tol``.

    Each connected region of the grid with ``|eta| >= 1 - tol`` yields one
    point, located by a bounded scalar search around the best grid value.
    Regions wider than ``plateau_cells`` grid cells are treated as saturated
    intervals and reported through both endpoints with the plateau flag set.

    Raises ``ValueError`` if the certificate exceeds ``1 + tol`` on the grid.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    h = period / grid_points
    grid = np.arange(grid_points) * h
    vals = np.asarray(eta(grid), dtype=float)
    if np.max(np.abs(vals)) > 1 + tol:
        raise ValueError(f"certificate is infeasible: max |eta| = {np.max(np.abs(vals)):.6g}")

    ts, signs, flags = [], [], []
    for region in _regions(np.abs(vals) >= 1 - tol):
        if region.size > plateau_cells:
            for idx in (region[0], region[-1]):
                ts.append(grid[idx])
                signs.append(int(np.sign(vals[idx])))
                flags.append(True)
            continue
        best = region[np.argmax(np.abs(vals[region]))]
        lo = grid[region[0]] - h
        hi = grid[region[0]] + region.size * h
        res = minimize_scalar(lambda u: -abs(float(eta(np.mod(u, period)))), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-10 * period})
        t_ref = float(np.mod(res.x, period))
        t = t_ref if -res.fun >= abs(vals[best]) else float(grid[best])
        ts.append(t)
        signs.append(int(np.sign(eta(t))))
        flags.append(False)
    return SaturationSet(np.array(ts), np.array(signs), tol, np.array(flags))


def saturation_bound(L: int, N: int) -> int:
    """Upper bound ``L * N`` on the number of isolated saturation points of an
    exponential-spline certificate of order ``N`` built from ``L`` samples."""
    if L < 1 or N < 1:
        raise ValueError("L and N must be >= 1")
    return int(L * N)


class Uniqueness(NamedTuple):
    matrix: np.ndarray
    full_rank: bool
    min_sv: float


def uniqueness_matrix(positions, taus, green, period=None) -> Uniqueness:
    """``Psi[l, p] = psi(theta_l - tau_p)`` with its rank verdict.

    Full rank means the smallest of the first ``min(L, P)`` singular values
    exceeds ``1e-8`` times the largest; more columns than rows is never
    full rank.
    """
    taus = np.asarray(taus, dtype=float).ravel()
    if taus.size < 1:
        raise ValueError("need at least one saturation knot")
    Psi = matrix_H(positions, taus, green, period)
    sv = np.linalg.svd(Psi, compute_uv=False)
    L, P = Psi.shape
    min_sv = float(sv[min(L, P) - 1])
    full = bool(P <= L and sv[0] > 0 and min_sv > RANK_RTOL * sv[0])
    return Uniqueness(Psi, full, min_sv)


def certificate_pairing(measure: SparseMeasure, samples: SampleSet, green, lam: float) -> float:
    """Relative gap ``|<eta, m> - ||m||_TV| / ||m||_TV`` for the empirical
    certificate of ``measure``; zero at an exact optimum."""
    tv = measure.tv_norm
    if tv == 0:
        return float("nan")
    eta = empirical_certificate(measure, samples, green, lam)
    pairing = float(measure.weights @ eta(measure.knots))
    return abs(pairing - tv) / tv


def rank_verdict(sat: SaturationSet, result: Uniqueness) -> str:
    state = "full rank" if result.full_rank else "rank deficient"
    return (f"saturation points: {len(sat)}; uniqueness matrix {result.matrix.shape[0]}x"
            f"{result.matrix.shape[1]} is {state} (min singular value {result.min_sv:.6g})")
