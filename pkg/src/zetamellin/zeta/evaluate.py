"""Evaluators for zeta(s) and the Hardy function Z(t).

Two independent routes are kept apart on purpose: :func:`zeta_em` is an
Euler-Maclaurin evaluator with a rigorous remainder bound, used both as the
oracle and for small ``t``; :func:`riemann_siegel_z` is the Riemann-Siegel
main sum with the Gabcke correction terms C0..C4.
"""

from __future__ import annotations

import math
from functools import lru_cache

import mpmath
import numpy as np

from ..errors import DomainError, PoleError
from ..numerics import bernoulli_even, rs_theta

TWO_PI = 2.0 * math.pi

# Above this height the Riemann-Siegel route meets the 1e-10 goal; below it
# z_hardy falls back to Euler-Maclaurin.
RS_CROSSOVER = 400.0
EM_TARGET = 1e-13
_EM_MAX_CORRECTIONS = 9


def _em_bound(s: np.ndarray, N: np.ndarray, M: int) -> np.ndarray:
    # |R_M| <= |(s)_{2M+1} B_{2M+2} N^{-sigma-2M-1} / ((2M+2)! (sigma+2M+1))| * |s+2M+1|
    rising = np.ones_like(s)
    for j in range(2 * M + 2):
        rising = rising * (s + j)
    b = abs(bernoulli_even(M + 1))
    sigma = s.real
    return (np.abs(rising) * b / math.factorial(2 * M + 2)
            * N ** (-sigma - 2 * M - 1) / np.abs(sigma + 2 * M + 1))


def em_terms(s, target: float = EM_TARGET, corrections: int = _EM_MAX_CORRECTIONS):
    """Smallest direct-sum length N (>= 10) pushing the remainder bound below ``target``."""
    ss = np.atleast_1d(np.asarray(s, dtype=complex))
    N = np.maximum(10, np.ceil(np.abs(ss.imag) / TWO_PI).astype(int) + 10)
    for _ in range(10000):
        bad = _em_bound(ss, N.astype(float), corrections) > target
        if not np.any(bad):
            break
        N[bad] += 5
    return N if np.ndim(s) else int(N[0])


def _zeta_em_fixed(s: np.ndarray, N: int, M: int):
    total = np.zeros_like(s)
    for n in range(1, N):
        total += np.exp(-s * math.log(n))
    logN = math.log(N)
    NS = np.exp(-s * logN)
    total += N * NS / (s - 1.0) + 0.5 * NS
    rising = s.copy()  # (s)_{2k-1}
    power = NS / N     # N^{-s-1}
    for k in range(1, M + 1):
        total += bernoulli_even(k) / math.factorial(2 * k) * rising * power
        rising = rising * (s + 2 * k - 1) * (s + 2 * k)
        power = power / (N * N)
    return total, _em_bound(s, float(N), M)


def zeta_em(s, terms: int | None = None, corrections: int = _EM_MAX_CORRECTIONS):
    """zeta(s) by Euler-Maclaurin summation.

    Parameters
    ----------
    s : complex or array
        Evaluation point(s); ``s = 1`` is rejected.
    terms : int, optional
        Length N of the direct sum. When omitted it is chosen per point from
        ``|Im s|`` so that the remainder bound is below 1e-13.
    corrections : int
        Number of Bernoulli correction terms (at most 9).

    Returns
    -------
    value, bound
        zeta(s) and the Euler-Maclaurin remainder bound for that truncation.
    """
    ss = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(ss == 1.0):
        raise PoleError("zeta_em: pole at s = 1")
    if not 1 <= corrections <= _EM_MAX_CORRECTIONS:
        raise DomainError(f"corrections must be in 1..{_EM_MAX_CORRECTIONS}")
    if terms is not None:
        if terms < 10:
            raise DomainError(f"zeta_em needs terms >= 10, got {terms}")
        Ns = np.full(ss.shape, terms)
    else:
        Ns = np.atleast_1d(em_terms(ss, corrections=corrections))
    value = np.empty_like(ss)
    bound = np.empty(ss.shape)
    for N in np.unique(Ns):
        m = Ns == N
        value[m], bound[m] = _zeta_em_fixed(ss[m], int(N), corrections)
    if np.ndim(s) == 0:
        return complex(value[0]), float(bound[0])
    return value, bound


def z_em(t):
    """Hardy Z(t) through Euler-Maclaurin: Re(exp(i theta) zeta(1/2+it))."""
    tt = np.asarray(t, dtype=float)
    zeta, _ = zeta_em(0.5 + 1j * np.atleast_1d(tt))
    z = np.real(np.exp(1j * rs_theta(np.abs(np.atleast_1d(tt)))) * zeta)
    return float(z[0]) if tt.ndim == 0 else z


# --------------------------------------------------------------------------
# Riemann-Siegel
# --------------------------------------------------------------------------

@lru_cache(maxsize=1)
def _psi_taylor(degree: int = 110) -> tuple[np.ndarray, ...]:
    """Taylor coefficients at x = 0 of Psi(1/2 + x) and of its derivatives 1..12.

    Psi(p) = cos(2 pi (p^2 - p - 1/16)) / cos(2 pi p) = -cos(2 pi x^2 - 5 pi/8) / cos(2 pi x).
    The quotient is entire, so power-series division converges; it is done at
    high precision because 1/cos alone has radius 1/4.
    """
    with mpmath.workdps(150):
        twopi = 2 * mpmath.pi
        c58, s58 = mpmath.cos(5 * mpmath.pi / 8), mpmath.sin(5 * mpmath.pi / 8)
        num = [mpmath.mpf(0)] * (degree + 1)
        m = 0
        while 4 * m <= degree:
            num[4 * m] += c58 * (-1) ** m * twopi ** (2 * m) / mpmath.factorial(2 * m)
            if 4 * m + 2 <= degree:
                num[4 * m + 2] += s58 * (-1) ** m * twopi ** (2 * m + 1) / mpmath.factorial(2 * m + 1)
            m += 1
        den = [mpmath.mpf(0)] * (degree + 1)
        for m in range(0, degree // 2 + 1):
            den[2 * m] = (-1) ** m * twopi ** (2 * m) / mpmath.factorial(2 * m)
        q = [mpmath.mpf(0)] * (degree + 1)
        for n in range(degree + 1):
            acc = -num[n]
            for k in range(1, n + 1):
                acc -= den[k] * q[n - k]
            q[n] = acc / den[0]
        derivs = []
        for order in range(13):
            coeffs = [q[j] * mpmath.ff(j, order) for j in range(order, degree + 1)]
            derivs.append(np.array([float(c) for c in coeffs]))
    return tuple(derivs)


def _psi(x: np.ndarray, order: int) -> np.ndarray:
    coeffs = _psi_taylor()[order]
    # coefficients decay super-exponentially; 60 terms are plenty on |x| <= 1/2
    return np.polynomial.polynomial.polyval(x, coeffs[:60])


def _rs_corrections(p: np.ndarray, a: np.ndarray, n_terms: int) -> np.ndarray:
    x = p - 0.5
    pi2 = math.pi ** 2
    d = {k: _psi(x, k) for k in (0, 1, 2, 3, 4, 5, 6, 8, 9, 12)}
    terms = [
        d[0],
        -d[3] / (96 * pi2),
        d[2] / (64 * pi2) + d[6] / (18432 * pi2 ** 2),
        -d[1] / (64 * pi2) - d[5] / (3840 * pi2 ** 2) - d[9] / (5308416 * pi2 ** 3),
        d[0] / (128 * pi2) + 19 * d[4] / (24576 * pi2 ** 2)
        + 11 * d[8] / (5898240 * pi2 ** 3) + d[12] / (2038431744 * pi2 ** 4),
    ]
    total = np.zeros_like(p)
    inv = 1.0 / a
    for k in reversed(range(n_terms)):
        total = total * inv + terms[k]
    return total


def riemann_siegel_z(t, corrections: int = 5):
    """Z(t) from the Riemann-Siegel main sum plus ``corrections`` Gabcke terms (0..5).

    Requires ``t >= 2 pi`` so the main sum is nonempty.
    """
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < TWO_PI):
        raise DomainError("riemann_siegel_z needs t >= 2*pi")
    a = np.sqrt(tt / TWO_PI)
    N = np.floor(a).astype(int)
    theta = rs_theta(tt)
    main = np.zeros_like(tt)
    for n in range(1, int(N.max()) + 1):
        m = N >= n
        main[m] += math.sqrt(1.0 / n) * np.cos(theta[m] - tt[m] * math.log(n))
    main *= 2.0
    if corrections:
        sign = np.where(N % 2 == 1, 1.0, -1.0)  # (-1)^(N-1)
        main += sign * a ** -0.5 * _rs_corrections(a - N, a, corrections)
    return float(main[0]) if np.ndim(t) == 0 else main


def z_hardy(t):
    """Hardy function Z(t), real and even in t.

    Riemann-Siegel with five correction terms for ``|t| >= RS_CROSSOVER``,
    Euler-Maclaurin below.
    """
    tt = np.abs(np.atleast_1d(np.asarray(t, dtype=float)))
    out = np.empty_like(tt)
    hi = tt >= RS_CROSSOVER
    if np.any(hi):
        out[hi] = riemann_siegel_z(tt[hi])
    if np.any(~hi):
        out[~hi] = z_em(tt[~hi])
    return float(out[0]) if np.ndim(t) == 0 else out


def z_method(t) -> np.ndarray:
    """Method tag used by :func:`z_hardy` at each abscissa (0 = riemann_siegel, 1 = euler_maclaurin)."""
    tt = np.abs(np.atleast_1d(np.asarray(t, dtype=float)))
    return np.where(tt >= RS_CROSSOVER, 0, 1).astype(np.uint8)


# --------------------------------------------------------------------------
# derivatives
# --------------------------------------------------------------------------

MAX_DERIV = 4


def z_hardy_deriv(t, k: int):
    """Main sum of the asymptotic expansion of Z^(k)(t).

    2 sum_{n <= sqrt(t/2pi)} n^(-1/2) L_n^k cos(t L_n - t/2 - pi/8 + pi k/2),
    with L_n = log(sqrt(t/2pi)/n). A boundary term with n exactly equal to
    sqrt(t/2pi) is included. The neglected remainder is of order
    ``t^(-1/4) (1.5 log t)^(k+1)``; see :func:`z_deriv_remainder`.
    """
    if not 0 <= k <= MAX_DERIV:
        raise DomainError(f"z_hardy_deriv supports 0 <= k <= {MAX_DERIV}, got {k}")
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < TWO_PI):
        raise DomainError("z_hardy_deriv needs t >= 2*pi")
    a = np.sqrt(tt / TWO_PI)
    N = np.floor(a).astype(int)
    out = np.zeros_like(tt)
    shift = -0.5 * tt - math.pi / 8 + math.pi * k / 2
    for n in range(1, int(N.max()) + 1):
        m = N >= n
        L = np.log(a[m] / n)
        out[m] += n ** -0.5 * L ** k * np.cos(tt[m] * L + shift[m])
    out *= 2.0
    return float(out[0]) if np.ndim(t) == 0 else out


def z_deriv_remainder(t, k: int):
    """Size t^(-1/4) (1.5 log t)^(k+1) of the neglected remainder (implied constant 1)."""
    tt = np.asarray(t, dtype=float)
    return tt ** -0.25 * (1.5 * np.log(tt)) ** (k + 1)
