"""Periodic pseudo-differential operators and their Green's functions.

Operators are described by their Fourier symbol in the basis
``e_n(t) = exp(2j*pi*n*t/T)``.  The periodic Dirac comb has every Fourier
coefficient equal to ``1/T`` in that basis, so the Green's function of an
invertible operator ``D`` has coefficients ``1 / (T * D_hat[n])``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_CUTOFF = 2048
REFERENCE_CUTOFF = 2 ** 16
IMAG_TOL = 1e-9


class Family(str, enum.Enum):
    EXPONENTIAL = "exponential"
    SOBOLEV = "sobolev"


@dataclass(frozen=True)
class OperatorSpec:
    """Exponential ``(D + alpha Id)^order`` or Sobolev
    ``(alpha^2 Id - D^2)^(order/2)`` operator on the torus of length ``period``."""

    family: Family
    alpha: float
    order: float
    period: float = 2 * math.pi

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.order > 1:
            raise ValueError(
                f"order must be > 1 for a continuous Green's function, got {self.order}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def has_closed_form(self) -> bool:
        return (self.family is Family.EXPONENTIAL
                and float(self.order).is_integer() and self.order >= 2)

    @classmethod
    def parse(cls, text: str, period: float = 2 * math.pi) -> "OperatorSpec":
        """Parse ``family:alpha:order`` (e.g. ``exponential:3:2``)."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"operator must look like family:alpha:order, got {text!r}")
        family, alpha, order = parts
        return cls(Family(family.strip().lower()), float(alpha), float(order), period)

    def to_string(self) -> str:
        return f"{self.family.value}:{self.alpha:g}:{self.order:g}"


@dataclass(frozen=True)
class FourierSymbol:
    """Symbol values ``D_hat[n]`` for ``n = -cutoff..cutoff``."""

    cutoff: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (2 * self.cutoff + 1,):
            raise ValueError("symbol must hold 2*cutoff+1 values")
        if np.any(values == 0):
            raise ValueError("symbol vanishes: operator is not invertible")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.cutoff, self.cutoff + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.cutoff:
            raise IndexError(n)
        return self.values[n + self.cutoff]

    def green_coefficients(self, period: float, M: Optional[int] = None) -> np.ndarray:
        """Fourier coefficients ``1/(T D_hat[n])`` for ``|n| <= M``."""
        M = self.cutoff if M is None else M
        if M > self.cutoff:
            raise ValueError(f"M={M} exceeds the symbol cutoff {self.cutoff}")
        vals = self.values[self.cutoff - M:self.cutoff + M + 1]
        return 1.0 / (period * vals)


def _symbol_values(spec: OperatorSpec, n: np.ndarray) -> np.ndarray:
    omega = 2 * np.pi * n / spec.period
    if spec.family is Family.EXPONENTIAL:
        base = 1j * omega + spec.alpha
        if float(spec.order).is_integer():
            return base ** int(spec.order)
        return np.exp(spec.order * np.log(base))  # principal branch
    return (spec.alpha ** 2 + omega ** 2) ** (spec.order / 2)


def make_symbol(spec: OperatorSpec, cutoff: int = DEFAULT_CUTOFF) -> FourierSymbol:
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    n = np.arange(-cutoff, cutoff + 1)
    return FourierSymbol(cutoff, _symbol_values(spec, n))


def green_eval_fourier(symbol: FourierSymbol, spec: OperatorSpec, t) -> np.ndarray:
    """Evaluate the truncated Fourier series of the Green's function at ``t``.

    Raises ``FloatingPointError`` if the series is not real, which would mean
    the symbol lacks conjugate symmetry.
    """
    t = np.asarray(t, dtype=float)
    coeffs = symbol.green_coefficients(spec.period)
    n = symbol.frequencies
    flat = t.ravel()
    out = np.empty(flat.shape, dtype=float)
    chunk = max(1, 2 ** 22 // n.size)
    for start in range(0, flat.size, chunk):
        ts = flat[start:start + chunk]
        phase = np.exp(2j * np.pi * np.outer(ts, n) / spec.period)
        vals = phase @ coeffs
        if np.any(np.abs(vals.imag) >= IMAG_TOL * (1 + np.abs(vals.real))):
            raise FloatingPointError("Green's function series has a non-negligible imaginary part")
        out[start:start + chunk] = vals.real
    return out.reshape(t.shape)


def exp_green_coeffs(alpha: float, N: int) -> np.ndarray:
    """Coefficients ``a_0..a_{N-1}`` of the polynomial ``P`` such that
    ``P(r) exp(-alpha r)`` on ``[0, 1)``, periodised, is the Green's function of
    ``(D + alpha Id)^N`` with unit period.

    The ``b_k = k! a_k`` are obtained from the leading one downwards.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if N < 1:
        raise ValueError("N must be >= 1")
    q = math.exp(-alpha)
    A = q / (1 - q)
    b = np.zeros(N)
    b[N - 1] = 1 / (1 - q)
    for k in range(2, N + 1):
        b[N - k] = A * sum(b[N - k + i] / math.factorial(i) for i in range(1, k))
    return np.array([b[k] / math.factorial(k) for k in range(N)])


def green_eval_closed_form(alpha: float, N: int, T: float, t) -> np.ndarray:
    """Exact periodic exponential Green's function for period ``T``.

    Uses ``psi_T(t) = T^(N-1) psi_1(t/T)`` where ``psi_1`` has parameter
    ``alpha*T``.
    """
    if N < 2:
        raise ValueError("closed form requires N >= 2")
    a = exp_green_coeffs(alpha * T, N)
    u = np.asarray(t, dtype=float) / T
    r = u - np.floor(u)
    return T ** (N - 1) * np.polynomial.polynomial.polyval(r, a) * np.exp(-alpha * T * r)


def cutoff_for_energy(spec: OperatorSpec, fraction: float,
                      reference: int = REFERENCE_CUTOFF) -> int:
    """Smallest ``M_c`` retaining ``fraction`` of the Green's function energy."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    n = np.arange(0, reference + 1)
    energy = np.abs(1.0 / _symbol_values(spec, n)) ** 2
    energy_neg = np.abs(1.0 / _symbol_values(spec, -n)) ** 2
    per_index = energy + energy_neg
    per_index[0] = energy[0]
    cumulative = np.cumsum(per_index)
    idx = int(np.searchsorted(cumulative, fraction * cumulative[-1], side="left"))
    return min(idx, reference)


class GreensFunction:
    """Callable Green's function of an :class:`OperatorSpec`.

    Integer-order exponential operators use the exact closed form unless
    ``closed_form=False``; everything else is a truncated Fourier series with
    ``cutoff`` coefficients on each side.
    """

    def __init__(self, spec: OperatorSpec, cutoff: int = DEFAULT_CUTOFF,
                 closed_form: Optional[bool] = None):
        if closed_form is None:
            closed_form = spec.has_closed_form
        if closed_form and not spec.has_closed_form:
            raise ValueError("closed form only exists for integer-order exponential operators")
        self.spec = spec
        self.cutoff = cutoff
        self.symbol = make_symbol(spec, cutoff)
        self.poly_coeffs = exp_green_coeffs(spec.alpha * spec.period, int(spec.order)) \
            if closed_form else None

    @property
    def period(self) -> float:
        return self.spec.period

    @property
    def is_closed_form(self) -> bool:
        return self.poly_coeffs is not None

    def __call__(self, t) -> np.ndarray:
        if self.is_closed_form:
            return green_eval_closed_form(self.spec.alpha, int(self.spec.order),
                                          self.spec.period, t)
        return green_eval_fourier(self.symbol, self.spec, t)

    def scaled(self, factor: float) -> "ScaledGreensFunction":
        return ScaledGreensFunction(self, factor)

    def __repr__(self):
        kind = "closed-form" if self.is_closed_form else f"fourier(M_c={self.cutoff})"
        return f"GreensFunction({self.spec.to_string()}, T={self.period:g}, {kind})"


class ScaledGreensFunction:
    """``c * psi`` for a base Green's function ``psi``; used by scale checks."""

    def __init__(self, base: GreensFunction, factor: float):
        self.base = base
        self.factor = factor
        self.spec = base.spec

    @property
    def period(self) -> float:
        return self.base.period

    def __call__(self, t):
        return self.factor * self.base(t)
