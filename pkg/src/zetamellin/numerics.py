"""Complex special functions, smooth bumps, and the gamma-factor objects R and R1.

Everything here is pure and vectorised over numpy arrays where it matters.
Working precision is IEEE double; documented tolerances are absolute unless
stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import DomainError, PoleError

# Bernoulli numbers B_2 .. B_20 as exact fractions.
_BERNOULLI = [
    Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30),
    Fraction(5, 66), Fraction(-691, 2730), Fraction(7, 6), Fraction(-3617, 510),
    Fraction(43867, 798), Fraction(-174611, 330),
]
# Stirling-series coefficients B_2k / (2k (2k-1)), k = 1..8; 8 terms reach ~1e-17 at |z| >= 10.
_STIRLING = np.array([float(b / ((2 * k) * (2 * k - 1)))
                      for k, b in enumerate(_BERNOULLI[:8], start=1)])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SHIFT_TO = 10.0


def bernoulli_even(k: int) -> float:
    """Return B_{2k} for 1 <= k <= 10."""
    return float(_BERNOULLI[k - 1])


def _is_nonpositive_integer(z: np.ndarray) -> np.ndarray:
    return (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))


def log_gamma(z):
    """Logarithm of the gamma function.

    Upward recurrence until ``Re z >= 10``, then an 8-term Stirling series.
    The recurrence subtracts ``sum(log(z + k))`` term by term, so for
    ``Re z > 0`` the result is the analytic (continuous) branch that agrees
    with the principal ``log`` on the positive real axis. Elsewhere only
    ``exp(log_gamma(z)) == Gamma(z)`` is promised.

    Raises
    ------
    PoleError
        If any ``z`` is a non-positive integer.
    """
    zz = np.asarray(z, dtype=complex)
    if np.any(_is_nonpositive_integer(zz)):
        raise PoleError(f"log_gamma: pole at non-positive integer in {z!r}")
    work = np.array(zz, copy=True)
    shift = np.zeros_like(work)
    n_shift = np.maximum(0, np.ceil(_SHIFT_TO - work.real)).astype(int)
    for k in range(int(n_shift.max(initial=0))):
        mask = n_shift > k
        shift[mask] += np.log(work[mask])
        work[mask] += 1.0
    inv = 1.0 / work
    inv2 = inv * inv
    series = np.zeros_like(work)
    for c in _STIRLING[::-1]:
        series = series * inv2 + c
    series *= inv
    out = (work - 0.5) * np.log(work) - work + _HALF_LOG_2PI + series - shift
    return out[()] if out.ndim == 0 else out


def chi(s):
    """Functional-equation factor pi^(s-1/2) Gamma((1-s)/2) / Gamma(s/2)."""
    ss = np.asarray(s, dtype=complex)
    num_arg = 0.5 - 0.5 * ss
    den_arg = 0.5 * ss
    if np.any(_is_nonpositive_integer(num_arg)):
        raise PoleError(f"chi: Gamma((1-s)/2) has a pole at s={s!r}")
    if np.any(_is_nonpositive_integer(den_arg)):
        raise PoleError(f"chi: Gamma(s/2) has a pole (chi vanishes) at s={s!r}")
    out = np.exp((ss - 0.5) * math.log(math.pi) + log_gamma(num_arg) - log_gamma(den_arg))
    return out[()] if out.ndim == 0 else out


def rs_theta(t):
    """Riemann-Siegel theta, the continuous branch of -arg(chi(1/2+it))/2.

    Computed as ``Im log_gamma(1/4 + it/2) - (t/2) log(pi)``; the analytic
    branch of :func:`log_gamma` makes the result continuous and odd in ``t``.
    """
    tt = np.asarray(t, dtype=float)
    out = np.imag(log_gamma(0.25 + 0.5j * tt)) - 0.5 * tt * math.log(math.pi)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# smooth bumps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpSpec:
    """Knots of a plateau bump: 0 outside [a, d], 1 on [b, c], monotone ramps."""

    a: float
    b: float
    c: float
    d: float
    smoothness: int = 8

    def __post_init__(self):
        if not (self.a < self.b <= self.c < self.d):
            raise DomainError(
                f"BumpSpec needs a < b <= c < d, got ({self.a}, {self.b}, {self.c}, {self.d})")
        if self.smoothness < 1:
            raise DomainError("BumpSpec.smoothness must be a positive integer")


def _jet_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # truncated Cauchy product of normalised Taylor coefficients (leading axis)
    n = p.shape[0]
    out = np.zeros_like(p)
    for i in range(n):
        out[i:] += p[i] * q[: n - i]
    return out


def _logistic_derivs(sig: np.ndarray, order: int) -> list[np.ndarray]:
    # d^m/dg^m logistic(g) as polynomials in sigma: P_{m+1}(s) = P_m'(s) s (1 - s)
    polys = [np.polynomial.Polynomial([0.0, 1.0])]
    base = np.polynomial.Polynomial([0.0, 1.0, -1.0])
    for _ in range(order):
        polys.append(polys[-1].deriv() * base)
    return [p(sig) for p in polys]


def _smoothstep_jet(u: np.ndarray, order: int) -> np.ndarray:
    """Taylor jet (coefficients f^(m)/m!) of the exp(-1/x) smoothstep on (0, 1)."""
    n = order + 1
    # within 1/200 of an end the function is flat to ~exp(-200)
    lo, hi = u < 0.005, u > 0.995
    if np.any(lo | hi):
        out = np.zeros((n,) + u.shape)
        out[0][hi] = 1.0
        mid = ~(lo | hi)
        if np.any(mid):
            out[:, mid] = _smoothstep_jet(u[mid], order)
        return out
    g = np.zeros((n,) + u.shape)
    # g(u) = 1/(1-u) - 1/u; d^m/du^m / m! of 1/(1-u) is (1-u)^-(m+1), of 1/u is (-1)^m u^-(m+1)
    for m in range(n):
        g[m] = (1.0 - u) ** (-(m + 1)) - (-1.0) ** m * u ** (-(m + 1))
    sig = expit(g[0])
    dsig = _logistic_derivs(sig, order)
    delta = g.copy()
    delta[0] = 0.0
    out = np.zeros_like(g)
    power = np.zeros_like(g)
    power[0] = 1.0
    for m in range(n):
        out += dsig[m] / math.factorial(m) * power
        power = _jet_mul(power, delta)
    return out


class SmoothBump:
    """C-infinity plateau function built from the exp(-1/x) partition of unity.

    Call the instance for values; :meth:`derivative` gives derivatives up to
    ``spec.smoothness``.
    """

    def __init__(self, spec: BumpSpec):
        self.spec = spec

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order: int = 1):
        if order < 0 or order > self.spec.smoothness:
            raise DomainError(f"derivative order {order} outside 0..{self.spec.smoothness}")
        a, b, c, d = self.spec.a, self.spec.b, self.spec.c, self.spec.d
        xx = np.asarray(x, dtype=float)
        out = np.zeros_like(xx)
        if order == 0:
            out[(xx >= b) & (xx <= c)] = 1.0
        up = (xx > a) & (xx < b)
        if np.any(up):
            u = (xx[up] - a) / (b - a)
            jet = _smoothstep_jet(u, order)
            out[up] = jet[order] * math.factorial(order) / (b - a) ** order
        down = (xx > c) & (xx < d)
        if np.any(down):
            u = (d - xx[down]) / (d - c)
            jet = _smoothstep_jet(u, order)
            out[down] = jet[order] * math.factorial(order) * (-1.0 / (d - c)) ** order
        return float(out) if out.ndim == 0 else out


def smooth_bump(spec: BumpSpec) -> SmoothBump:
    """Return the plateau bump described by ``spec``."""
    return SmoothBump(spec)


# --------------------------------------------------------------------------
# gamma-factor objects
# --------------------------------------------------------------------------

R1_FLOOR = 0.5


def _log_r1(y: np.ndarray) -> np.ndarray:
    half = 0.5j * y
    ratio = -1j * y * math.log(2.0) + log_gamma(0.25 - half) - log_gamma(0.25 + half)
    ay = np.abs(y)
    log_cosh = math.pi * ay + np.log1p(np.exp(-2.0 * math.pi * ay)) - math.log(2.0)
    return 0.5 * math.log(math.pi / 2.0) + 3.0 * ratio + log_gamma(2j * y) + log_cosh


def r1(y, floor: float = R1_FLOOR):
    """R1(y) = sqrt(pi/2) (2^(-iy) G(1/4 - iy/2)/G(1/4 + iy/2))^3 G(2iy) cosh(pi y).

    Assembled in log space so that Gamma(2iy) cosh(pi y) never overflows.
    ``|R1(y)|`` behaves like ``pi / (2 sqrt(2|y|))`` for large ``|y|``.

    Raises
    ------
    PoleError
        If ``|y| < floor`` (Gamma(2iy) has a pole at 0).
    """
    yy = np.asarray(y, dtype=float)
    if np.any(np.abs(yy) < floor):
        raise PoleError(f"r1: |y| below singular floor {floor} in {y!r}")
    out = np.exp(_log_r1(yy))
    return complex(out) if out.ndim == 0 else out


def residue_R(kappa_h: float, weight: float) -> complex:
    """Residue of Z_2 at s = 1/2 + i kappa_h given the summed weight alpha_j H_j^3(1/2).

    The residue at the conjugate pole is the complex conjugate of this value.
    """
    if kappa_h <= 0:
        raise DomainError(f"residue_R needs kappa_h > 0, got {kappa_h}")
    if weight == 0:
        return 0j
    return complex(weight * r1(kappa_h))


def finite_or_raise(value, what: str):
    """Raise DomainError if ``value`` holds NaN or infinity."""
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{what}: non-finite result")
    return value


Function = Callable[[np.ndarray], np.ndarray]
