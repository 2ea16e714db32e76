"""Modified Mellin transforms m[f](s) = int_1^oo f(x) x^(-s) dx and the Z_k(s) family.

Transforms are computed in the variable u = log x, where x^(-s) becomes
exp(-s u). Panels in u follow any x-panel layout the integrand needs (the
moment engine's zero-spacing panels for zeta data) and are refined so a
single 16-node panel never spans more than a few oscillations of
exp(-i t u). Along vertical lines the same node set serves every t.

Truncation estimates attached to results are heuristic: they come from
growth envelopes with constants calibrated on the data, not from proofs.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, EnvelopeError, PoleError
from .moments import A4, MomentEngine, P4Coefficients, default_engine, e2, main_term
from .numerics import BumpSpec, smooth_bump
from .quadrature import TWO_PI, gl_rule, line_grid, line_integral
from .zeta import z_hardy

logger = logging.getLogger(__name__)

POLE_GUARD = 1e-3
SIGMA_MARGIN = 1e-2
CONVERGENCE_MARGIN = 1e-2
DEFAULT_X = 5000.0
MAX_PHASE_PER_PANEL = 10.0  # largest t * (panel width in u) allowed
_BLOCK = 64                 # exact phase refresh interval for uniform lines
_CHUNK_ELEMENTS = 2_000_000


# --------------------------------------------------------------------------
# transform functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """Growth model |f(x)| <= C x^p (log x)^q for x beyond the truncation point.

    ``C = 0`` means f vanishes there.
    """

    C: float
    p: float = 0.0
    q: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.C * x ** self.p * np.log(x) ** self.q

    def tail(self, sigma: float, X: float, extra_power: float = 0.0) -> float:
        """Envelope bound for int_X^oo |f(x)| x^(extra_power - sigma) dx.

        Raises
        ------
        EnvelopeError
            When the bound diverges, i.e. sigma <= p + extra_power + 1.
        """
        if self.C == 0:
            return 0.0
        beta = sigma - self.p - extra_power - 1.0
        if beta <= 0:
            raise EnvelopeError(
                f"envelope x^{self.p} log^{self.q} x is not integrable against x^-{sigma}")
        L = math.log(X)
        # int_L^oo v^q e^(-beta v) dv
        value = special.gamma(self.q + 1) * special.gammaincc(self.q + 1, beta * L) / beta ** (self.q + 1)
        return float(self.C * value)


@dataclass(frozen=True)
class TransformFn:
    """A real function on [1, X] with a tail envelope beyond X.

    Parameters
    ----------
    func
        Vectorised evaluator; never called beyond ``X``.
    X
        Largest abscissa at which ``func`` may be evaluated.
    envelope
        Growth model for x > X. The default (C = 0) declares f = 0 there.
    breaks
        Points in (1, X) where f is not smooth; panels are split there.
    edges
        Optional x-panel layout that resolves f (e.g. moment-engine edges).
    """

    func: Callable[[np.ndarray], np.ndarray]
    X: float
    envelope: Envelope = Envelope(0.0)
    breaks: tuple = ()
    edges: np.ndarray | None = field(default=None, compare=False)
    name: str = "f"

    def __post_init__(self):
        if not self.X >= 1:
            raise DomainError(f"TransformFn needs X >= 1, got {self.X}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > self.X * (1 + 1e-12)):
            raise DomainError(f"{self.name}: evaluation beyond X = {self.X} requested")
        return self.func(x)

    def scaled(self, c: float) -> "TransformFn":
        env = Envelope(abs(c) * self.envelope.C, self.envelope.p, self.envelope.q)
        return TransformFn(lambda x: c * self.func(x), self.X, env, self.breaks, self.edges,
                           f"{c}*{self.name}")

    def __add__(self, other: "TransformFn") -> "TransformFn":
        X = min(self.X, other.X)
        e1, e2 = self.envelope, other.envelope
        # the sum is bounded by the sum of envelopes; keep the slower-decaying exponents
        env = Envelope(e1.C + e2.C, max(e1.p, e2.p), max(e1.q, e2.q)) if (e1.C or e2.C) else Envelope(0.0)
        return TransformFn(lambda x: self.func(x) + other.func(x), X, env,
                           tuple(sorted(set(self.breaks) | set(other.breaks))), self.edges,
                           f"{self.name}+{other.name}")


def power_function(a: float, X: float = 1e4) -> TransformFn:
    """f(x) = x^(-a), transform 1/(s + a - 1)."""
    return TransformFn(lambda x: x ** -a, X, Envelope(1.0, -a, 0.0), name=f"x^-{a}")


def indicator_function(lo: float, hi: float) -> TransformFn:
    """Indicator of [lo, hi] with 1 <= lo < hi."""
    if not 1 <= lo < hi:
        raise DomainError(f"indicator needs 1 <= lo < hi, got [{lo}, {hi}]")
    return TransformFn(lambda x: ((x >= lo) & (x <= hi)).astype(float), hi, Envelope(0.0),
                       breaks=(lo,) if lo > 1 else (), name=f"1[{lo},{hi}]")


def e2_over_x(coeffs: P4Coefficients, X: float = 1e3,
              engine: MomentEngine | None = None) -> TransformFn:
    """f(x) = E2(x) / x on [1, X], whose transform at s is s^-1 z_2 with E2 truncated at X.

    Sampled on the moment engine's panels; nothing is assumed beyond X.
    """
    eng = engine or default_engine(X)
    return TransformFn(lambda x: e2(x, coeffs, eng) / x, float(X), edges=eng.edges, name="E2/x")


def power_transform(a: float):
    return lambda s: 1.0 / (np.asarray(s) + a - 1.0)


def indicator_transform(lo: float, hi: float):
    def F(s):
        s = np.asarray(s, dtype=complex)
        d = s - 1.0
        at_one = d == 0
        safe = np.where(at_one, 1.0, d)
        return np.where(at_one, math.log(hi / lo), (lo ** -safe - hi ** -safe) / safe)
    return F


# --------------------------------------------------------------------------
# core quadrature in u = log x
# --------------------------------------------------------------------------

def log_nodes(X: float, tmax: float, edges_x: np.ndarray | None = None,
              breaks: Iterable[float] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes u and weights on [0, log X].

    Panels start from ``log(edges_x)`` (clipped to [1, X]) plus ``breaks``
    and are subdivided until t * width <= MAX_PHASE_PER_PANEL for |t| <= tmax.
    """
    pts = {0.0, math.log(X)}
    if edges_x is not None:
        ex = np.asarray(edges_x, dtype=float)
        ex = ex[(ex > 1) & (ex < X)]
        pts.update(np.log(ex).tolist())
    pts.update(math.log(b) for b in breaks if 1 < b < X)
    base = np.array(sorted(pts))
    hmax = min(0.25, MAX_PHASE_PER_PANEL / max(tmax, 1.0))
    pieces = np.maximum(1, np.ceil(np.diff(base) / hmax).astype(int))
    edges = np.concatenate([np.linspace(base[i], base[i + 1], pieces[i] + 1)[:-1]
                            for i in range(len(pieces))] + [base[-1:]])
    x, w = gl_rule()
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return (a + half * (x + 1.0)).ravel(), (half * w).ravel()


def _uniform_step(s: np.ndarray):
    """(sigma, t0, dt) when ``s`` is a uniform vertical grid, else None."""
    if s.ndim != 1 or len(s) < 3 or np.any(s.real != s.real[0]):
        return None
    d = np.diff(s.imag)
    if np.allclose(d, d[0], rtol=1e-10, atol=1e-12 * max(1.0, abs(s.imag).max())) and d[0] != 0:
        return float(s.real[0]), float(s.imag[0]), float(d[0])
    return None


def laplace_sum(u: np.ndarray, base: np.ndarray, s) -> np.ndarray:
    """sum_i base_i exp(-s u_i) for each s.

    On a uniform vertical grid the phase exp(-i t u) is advanced by a fixed
    factor and recomputed exactly every 64 steps.
    """
    ss = np.atleast_1d(np.asarray(s, dtype=complex))
    out = np.empty(ss.shape, dtype=complex)
    flat = ss.ravel()
    uni = _uniform_step(flat)
    if uni is not None:
        sigma, t0, dt = uni
        b = base * np.exp(-sigma * u)
        step = np.exp(-1j * dt * u)
        res = np.empty(len(flat), dtype=complex)
        phase = None
        for j in range(len(flat)):
            if j % _BLOCK == 0:
                phase = np.exp(-1j * (t0 + j * dt) * u)
            else:
                phase *= step
            res[j] = b @ phase
    else:
        rows = max(1, _CHUNK_ELEMENTS // max(1, len(u)))
        res = np.concatenate([np.exp(-np.outer(flat[i:i + rows], u)) @ base
                              for i in range(0, len(flat), rows)])
    out.ravel()[:] = res
    return out if np.ndim(s) else out[0]


def mellin_truncated(f: TransformFn, s, X: float | None = None):
    """int_1^X f(x) x^(-s) dx and the envelope bound on the neglected tail.

    Parameters
    ----------
    f : TransformFn
    s : complex or array of complex
    X : float, optional
        Truncation point, at most ``f.X`` (default ``f.X``).

    Returns
    -------
    value, tail
        ``value`` has the shape of ``s``; ``tail`` bounds |int_X^oo f x^-s|
        using the smallest real part among the ``s``.

    Raises
    ------
    EnvelopeError
        When the tail envelope is not integrable for the given sigma.
    """
    X = f.X if X is None else float(X)
    if X > f.X * (1 + 1e-12):
        raise DomainError(f"X = {X} exceeds the evaluation range of {f.name}")
    ss = np.asarray(s, dtype=complex)
    sigma = float(np.min(ss.real))
    tail = f.envelope.tail(sigma, X) if X >= f.X * (1 - 1e-12) or f.envelope.C else 0.0
    if X < f.X and f.envelope.C == 0:
        # f is known beyond X; its tail is unknown to the envelope, so bound it by quadrature of |f|
        u, w = log_nodes(f.X, 1.0, f.edges, f.breaks)
        m = u > math.log(X)
        x = np.exp(u[m])
        tail = float(np.sum(w[m] * np.abs(f(x)) * x ** (1.0 - sigma)))
    tmax = float(np.max(np.abs(ss.imag))) if ss.size else 1.0
    u, w = log_nodes(X, tmax, f.edges, f.breaks)
    x = np.exp(u)
    value = laplace_sum(u, w * f(x) * x, ss)
    return value, tail


# --------------------------------------------------------------------------
# vertical-line operations
# --------------------------------------------------------------------------

def _decay_check(v: np.ndarray, vals: np.ndarray, power: float, what: str) -> None:
    """Require sup |v|^power |vals| over the outer half of the line not to exceed the inner quarter."""
    a = np.abs(v)
    vmax = a.max()
    outer = np.abs(vals[(a >= vmax / 2)]) * a[(a >= vmax / 2)] ** power
    inner_mask = (a >= vmax / 4) & (a < vmax / 2)
    inner = np.abs(vals[inner_mask]) * a[inner_mask] ** power
    if outer.max(initial=0.0) > inner.max(initial=0.0) * (1 + 1e-9) + 1e-300:
        raise EnvelopeError(f"{what}: integrand does not decay like |t|^-{power} on the line")


def mellin_inverse(Fstar: Callable, x, sigma: float, Tmax: float):
    """f(x) = (1 / 2 pi i) int_(sigma) F*(s) x^(s-1) ds, truncated at |t| <= Tmax.

    The integrand is tapered smoothly to zero over the outer half of the
    line to suppress truncation ringing. ``x`` may be an array.
    """
    xx = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xx <= 1):
        raise DomainError("mellin_inverse needs x > 1")
    v = line_grid(Tmax)
    F = np.asarray(Fstar(sigma + 1j * v), dtype=complex)
    _decay_check(v, F, 0.0, "mellin_inverse")
    out = np.empty(len(xx))
    for i, xi in enumerate(xx):
        vals = F * np.exp((sigma - 1.0 + 1j * v) * math.log(xi))
        out[i] = line_integral(vals, v, tmax=Tmax, mode="taper")[0].real
    return out if np.ndim(x) else float(out[0])


def convolve_lines(Fstar: Callable, Gstar: Callable, s: complex, c: float, Tmax: float,
                   *, estimate: bool = False):
    """(1 / 2 pi i) int_(c) F*(w) G*(s + 1 - w) dw, the transform of f g at s.

    The w-line is truncated at |Im w| <= Tmax with a C/v^2 tail correction.
    With ``estimate=True`` the tail-correction size is returned as well.
    """
    v = line_grid(Tmax)
    w = c + 1j * v
    vals = np.asarray(Fstar(w), dtype=complex) * np.asarray(Gstar(s + 1.0 - w), dtype=complex)
    _decay_check(v, vals, 1.0, "convolve_lines")
    value, err = line_integral(vals, v, tmax=Tmax, mode="algebraic")
    return (value, err) if estimate else value


# --------------------------------------------------------------------------
# identity checks
# --------------------------------------------------------------------------

@dataclass
class IdentityResult:
    """Both sides of a numerical identity and the error budget it is judged against."""

    check: str
    lhs: complex
    rhs: complex
    budget: float

    @property
    def abs_diff(self) -> float:
        return float(abs(self.lhs - self.rhs))

    @property
    def rel_diff(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return self.abs_diff / scale if scale else 0.0

    @property
    def passed(self) -> bool:
        return self.abs_diff <= self.budget


def _fmt(z) -> str:
    z = complex(z)
    return repr(z.real) if z.imag == 0 else repr(z)


def write_identity_csv(results: Sequence[IdentityResult], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "lhs", "rhs", "abs_diff", "rel_diff", "budget"])
        for r in results:
            w.writerow([r.check, _fmt(r.lhs), _fmt(r.rhs), repr(r.abs_diff), repr(r.rel_diff),
                        repr(float(r.budget))])


def parseval_pair(f: TransformFn, sigma: float, X: float | None = None, Tmax: float = 1e3,
                  *, name: str = "parseval") -> IdentityResult:
    """Both sides of Parseval's formula for the modified Mellin transform.

    lhs = int_1^X f^2 x^(1-2 sigma) dx (plus the envelope tail);
    rhs = (1/2 pi) int_{|t|<=Tmax} |F*(sigma+it)|^2 dt with a C/t^2 tail.
    The budget is the sum of both truncation estimates.
    """
    X = f.X if X is None else float(X)
    u, w = log_nodes(X, 1.0, f.edges, f.breaks)
    x = np.exp(u)
    fx = f(x)
    lhs = float(np.sum(w * fx * fx * x ** (2.0 - 2.0 * sigma)))
    lhs_tail = 0.0
    if f.envelope.C:
        sq = Envelope(f.envelope.C ** 2, 2 * f.envelope.p, 2 * f.envelope.q)
        lhs_tail = sq.tail(2 * sigma - 1, X)
    v = line_grid(Tmax)
    half = v[v.size // 2:]
    F_half, _ = mellin_truncated(f, sigma + 1j * half, X)
    F = np.concatenate([np.conj(F_half[:0:-1]), F_half])  # f real: F(conj s) = conj F(s)
    vals = np.abs(F) ** 2
    rhs, rhs_err = line_integral(vals.astype(complex), v, tmax=Tmax, mode="algebraic")
    return IdentityResult(name, lhs + lhs_tail, rhs.real, lhs_tail + rhs_err + 1e-9 * abs(lhs))


def mean_value_ratio(g: Callable, a: float, b: float, sigma: float, T: float,
                 step: float = 0.05) -> float:
    """Ratio of int_0^T |int_a^b g x^-s dx|^2 dt to 2 pi int_a^b g^2 x^(1-2 sigma) dx.

    The inequality says the ratio never exceeds 1; for real g it is in fact
    at most about 1/2 because the full-line integral splits evenly between
    t > 0 and t < 0.
    """
    if not a < b:
        raise DomainError(f"mean_value_ratio needs a < b, got [{a}, {b}]")
    if a < 2:
        raise DomainError("mean_value_ratio needs [a, b] inside [2, oo)")
    u, w = log_nodes(b, T, np.array([a, b]), (a,))
    m = u >= math.log(a)
    u, w = u[m], w[m]
    x = np.exp(u)
    gx = np.asarray(g(x), dtype=float)
    denom = TWO_PI * float(np.sum(w * gx * gx * x ** (2.0 - 2.0 * sigma)))
    if denom == 0:
        return 0.0
    n = max(2, int(math.ceil(T / step)))
    t = np.linspace(0.0, T, n + 1)
    F = laplace_sum(u, w * gx * x, sigma + 1j * t)
    tw = np.full(n + 1, T / n)
    tw[0] = tw[-1] = 0.5 * T / n
    return float(np.sum(tw * np.abs(F) ** 2)) / denom


# --------------------------------------------------------------------------
# principal part of Z_2 at s = 1
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CjCoefficients:
    """Laurent coefficients c0..c5 of Z_2(s) at s = 1.

    ``c[j]`` multiplies (s-1)^(-j). c1..c5 come from Q4 = P4 + P4' through
    int_1^oo (log x)^m x^(-s) dx = m! / (s-1)^(m+1); c0 = a0 - int_0^1 Z^4
    is the constant produced by integrating the boundary term at x = 1.
    """

    c: tuple[float, float, float, float, float, float]
    source: P4Coefficients
    m1: float

    def principal(self, s, include_c0: bool = True):
        d = np.asarray(s, dtype=complex) - 1.0
        total = np.zeros_like(d)
        inv = 1.0 / d
        for j in range(5, 0, -1):
            total = (total + self.c[j]) * inv
        if include_c0:
            total = total + self.c[0]
        return total


def c_from_a(coeffs: P4Coefficients, m1: float | None = None,
             engine: MomentEngine | None = None) -> CjCoefficients:
    """c_(m+1) = m! q_m where Q4 = sum q_m x^m; c0 = a0 - int_0^1 Z^4.

    ``m1`` (the integral of Z^4 over [0, 1]) is taken from the moment engine
    unless given.
    """
    q = coeffs.q4_coefficients()
    if m1 is None:
        eng = engine or default_engine(1.0)
        m1 = float(eng.moment(1.0))
    c = [coeffs.a[0] - m1] + [math.factorial(m) * float(q[m]) for m in range(5)]
    return CjCoefficients(tuple(c), coeffs, float(m1))


# --------------------------------------------------------------------------
# Z_k(s) and the continuation z_2
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MellinLineSample:
    """One value of a transform on a vertical line with its truncation estimate."""

    sigma: float
    t: float
    value: complex
    X: float
    trunc_err: float
    method: str = ""


@dataclass
class MellinLine:
    """Values on a vertical line, column-wise."""

    sigma: float
    t: np.ndarray
    value: np.ndarray
    trunc_err: np.ndarray
    X: float
    method: str = ""

    def __len__(self) -> int:
        return len(self.t)

    def samples(self) -> list[MellinLineSample]:
        return [MellinLineSample(self.sigma, float(t), complex(v), self.X, float(e), self.method)
                for t, v, e in zip(self.t, self.value, self.trunc_err)]

    def write_csv(self, path: str | Path, append: bool = False) -> None:
        write_line_csv([self], path)


def write_line_csv(lines: Sequence[MellinLine], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma", "t", "re", "im", "trunc_err"])
        for line in lines:
            for t, v, e in zip(line.t, line.value, line.trunc_err):
                w.writerow([repr(float(line.sigma)), repr(float(t)), repr(float(v.real)),
                            repr(float(v.imag)), repr(float(e))])


def _zk_values(k: int, s: np.ndarray, X: float, engine: MomentEngine | None):
    if k not in (1, 2, 3, 4):
        raise DomainError(f"zk_direct supports k in 1..4, got {k}")
    if np.any(s.real <= 1):
        raise DomainError("the direct transform needs sigma > 1")
    eng = engine if engine is not None and engine.power == k else default_engine(X, power=k)
    if X > eng.edges[-1]:
        raise DomainError(f"X = {X} exceeds the sampled range [0, {eng.edges[-1]}]")
    interp = eng.interpolant(k)
    tmax = float(np.max(np.abs(s.imag))) if s.size else 1.0
    u, w = log_nodes(X, tmax, eng.edges)
    x = np.exp(u)
    # fresh evaluations: the panel interpolant is accurate only to ~1e-5 between nodes
    zk = z_hardy(x) ** (2 * k)
    values = laplace_sum(u, w * zk * x, s)
    # tail: mean of Z^(2k) grows like (log x)^(k^2); the average over [X/2, X]
    # is taken as the level at the block midpoint 3X/4
    mean = (interp.integral_to(X) - interp.integral_to(X / 2)) / (X / 2)
    kk = k * k
    sig = s.real
    L = math.log(X)
    beta = sig - 1.0
    tail = (mean * math.log(0.75 * X) ** -kk * special.gamma(kk + 1)
            * special.gammaincc(kk + 1, beta * L) / beta ** (kk + 1))
    return values, tail + np.abs(values) * 1e-12


def zk_direct(k: int, s, X: float = 1e3, engine: MomentEngine | None = None):
    """Z_k(s) = int_1^X Z(x)^(2k) x^(-s) dx for sigma > 1, with a tail estimate.

    Returns a :class:`MellinLineSample` for scalar ``s`` and a
    :class:`MellinLine` when ``s`` is a vertical grid (array).
    """
    ss = np.atleast_1d(np.asarray(s, dtype=complex))
    values, err = _zk_values(k, ss, float(X), engine)
    method = f"direct_k{k}"
    if np.ndim(s) == 0:
        return MellinLineSample(float(ss.real[0]), float(ss.imag[0]), complex(values[0]), float(X),
                                float(err[0]), method)
    return MellinLine(float(ss.real[0]), ss.imag.copy(), values, np.asarray(err, float), float(X), method)


def z2_direct(s, X: float = 1e3, engine: MomentEngine | None = None):
    """Z_2(s) = int_1^X Z(x)^4 x^(-s) dx for sigma > 1 (see :func:`zk_direct`)."""
    return zk_direct(2, s, X, engine)


def _e2_nodes(cj: CjCoefficients, X: float, tmax: float, engine: MomentEngine | None):
    eng = engine or default_engine(X)
    if X > eng.edges[-1]:
        raise DomainError(f"X = {X} exceeds the sampled range [0, {eng.edges[-1]}]")
    u, w = log_nodes(X, tmax, eng.edges)
    x = np.exp(u)
    e2 = eng.moment(x) - main_term(x, cj.source)
    return u, w, x, e2, eng.fourth.error_to(x)


def _per_sigma(sigma: np.ndarray, base: np.ndarray, x: np.ndarray) -> np.ndarray:
    """sum_i base_i x_i^(-sigma) for each sigma, computed once per distinct sigma."""
    levels, inverse = np.unique(sigma, return_inverse=True)
    sums = np.array([np.sum(base * x ** -lv) for lv in levels])
    return sums[inverse.ravel()]


def _x_taper(x: np.ndarray, X: float) -> np.ndarray:
    return smooth_bump(BumpSpec(0.5, 0.75, X / 2, X))(x)


def z2_continued_values(s, cj: CjCoefficients, X: float = DEFAULT_X, *, taper: bool | None = None,
                        engine: MomentEngine | None = None):
    """Vectorised core of :func:`z2_continued`; returns (values, trunc_err)."""
    ss = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(ss.real <= 0.5 + SIGMA_MARGIN):
        raise DomainError(f"z2_continued needs sigma > 1/2 + {SIGMA_MARGIN}")
    if np.any(np.abs(ss - 1.0) < POLE_GUARD):
        raise PoleError(f"z2_continued: |s - 1| < {POLE_GUARD}")
    sigma_min = float(ss.real.min())
    if taper is None:
        taper = sigma_min < 1.0
    tmax = float(np.max(np.abs(ss.imag))) if ss.size else 1.0
    u, w, x, e2, e2_err = _e2_nodes(cj, X, tmax, engine)
    weight = _x_taper(x, X) if taper else np.ones_like(x)
    # s int E2 x^(-s-1) dx = s int E2(e^u) e^(-s u) du
    integral = laplace_sum(u, w * e2 * weight, ss)
    values = cj.principal(ss) + ss * integral
    upper = x >= X / 2
    if taper:
        # mass removed by the taper: a proxy for the truncation effect
        removed = _per_sigma(ss.real, (w * np.abs(e2) * (1 - weight))[upper], x[upper])
        err = np.abs(ss) * removed
    else:
        # tail int_X^oo |E2| x^(-sigma-1) with |E2| <= C x^(2/3), C calibrated on [X/2, X]
        C = float(np.max(np.abs(e2[upper]) * x[upper] ** (-2.0 / 3.0)))
        beta = ss.real - 2.0 / 3.0
        err = np.abs(ss) * C * X ** -beta / beta
    # quadrature error of the running moment M(x) carried through the integral
    err = err + np.abs(ss) * _per_sigma(ss.real, w * e2_err, x)
    return values.reshape(np.shape(s)) if np.ndim(s) else values, np.asarray(err).reshape(np.shape(s)) if np.ndim(s) else err


def z2_continued(s, cj: CjCoefficients, X: float = DEFAULT_X, *, taper: bool | None = None,
                 engine: MomentEngine | None = None):
    """Z_2(s) = sum_j c_j (s-1)^(-j) + s int_1^X E2(x) x^(-s-1) dx, valid for sigma > 1/2.

    Parameters
    ----------
    s : complex or array
        Must satisfy sigma > 1/2 + 0.01 and |s - 1| >= 1e-3.
    cj : CjCoefficients
        Principal part; E2 is formed with ``cj.source``.
    X : float
        Truncation of the E2 integral.
    taper : bool, optional
        Multiply E2 by a smooth cutoff on [X/2, X]. Defaults to on for
        sigma < 1, where the integral converges only conditionally.

    Returns
    -------
    MellinLineSample for scalar ``s``, MellinLine for an array.
    """
    values, err = z2_continued_values(s, cj, X, taper=taper, engine=engine)
    ss = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.ndim(s) == 0:
        return MellinLineSample(float(ss.real[0]), float(ss.imag[0]), complex(values[0]), float(X),
                                float(err[0]), "continued")
    return MellinLine(float(ss.real[0]), ss.imag.copy(), np.asarray(values), np.asarray(err, float),
                      float(X), "continued")


def i_sigma_profile(sigma: float, T: Sequence[float], cj: CjCoefficients, X: float = DEFAULT_X,
                    step: float = 0.05, engine: MomentEngine | None = None) -> np.ndarray:
    """I_sigma(T) = int_1^T |Z_2(sigma+it)|^2 dt at each T (trapezoid, one pass)."""
    if not 0.5 < sigma < 1:
        raise DomainError(f"i_sigma needs 1/2 < sigma < 1, got {sigma}")
    T = np.asarray(T, dtype=float)
    if np.any(T <= 1):
        raise DomainError("i_sigma needs T > 1")
    Tmax = float(T.max())
    n = int(math.ceil((Tmax - 1.0) / step))
    t = 1.0 + step * np.arange(n + 1)
    values, _ = z2_continued_values(sigma + 1j * t, cj, X, engine=engine)
    sq = np.abs(values) ** 2
    cum = np.concatenate([[0.0], np.cumsum(0.5 * step * (sq[1:] + sq[:-1]))])
    # linear interpolation of the running integral for T off the grid
    return np.interp(T, t, cum)


def i_sigma(sigma: float, T: float, cj: CjCoefficients, X: float = DEFAULT_X, step: float = 0.05,
            engine: MomentEngine | None = None) -> float:
    """int_1^T |Z_2(sigma+it)|^2 dt on a trapezoid grid of the given step."""
    return float(i_sigma_profile(sigma, [T], cj, X, step, engine)[0])


@dataclass
class ContourResult:
    """E2(T) from a vertical line left of s = 1 and the residue there."""

    T: float
    value: float
    line: float
    residue: float
    m1: float
    trunc_err: float


def residue_circle(T: float, cj: CjCoefficients, radius: float, n: int = 128) -> float:
    """(1 / 2 pi i) around |s-1| = radius of sum_{j>=1} c_j (s-1)^(-j) T^s / s.

    When the c_j come from P4 this is T P4(log T) - a0 - sum_j (-1)^j c_j:
    the closed form int_1^T Q4(log x) dx also collects the residue at s = 0.
    """
    phi = TWO_PI * np.arange(n) / n
    d = radius * np.exp(1j * phi)
    s = 1.0 + d
    vals = cj.principal(s, include_c0=False) * np.exp(s * math.log(T)) / s * d
    return float(np.mean(vals).real)


def e2_contour(T: float, sigma_c: float, Vmax: float, cj: CjCoefficients, X: float = DEFAULT_X,
               radius: float | None = None, engine: MomentEngine | None = None) -> ContourResult:
    """E2(T) = int_0^1 Z^4 + Res_{s=1} + (1/2 pi i) int_(sigma_c) Z_2(s) T^s / s ds - T P4(log T).

    The line integral is truncated at |Im s| <= Vmax with a smooth taper and
    the residue is taken by trapezoid quadrature on a circle of the given
    radius, which must stay right of the line.
    """
    if not 0.5 < sigma_c < 1:
        raise DomainError(f"e2_contour needs 1/2 < sigma_c < 1, got {sigma_c}")
    if T <= 1:
        raise DomainError("e2_contour needs T > 1")
    if radius is None:
        radius = 0.5 * (1.0 - sigma_c)
    if not 0 < radius < 1.0 - sigma_c:
        raise DomainError(f"residue circle radius {radius} crosses the line sigma = {sigma_c}")
    v = line_grid(Vmax)
    half = v[v.size // 2:]
    z_half, err_half = z2_continued_values(sigma_c + 1j * half, cj, X, engine=engine)
    z = np.concatenate([np.conj(z_half[:0:-1]), z_half])
    s = sigma_c + 1j * v
    vals = z * np.exp(s * math.log(T)) / s
    line, est = line_integral(vals, v, tmax=Vmax, mode="taper")
    residue = residue_circle(T, cj, radius)
    value = cj.m1 + residue + line.real - float(main_term(T, cj.source))
    # truncation: line-edge size plus the z2 truncation carried through the line integral
    carried = float(np.sum(err_half / np.abs(sigma_c + 1j * half)) * (half[1] - half[0])
                    * T ** sigma_c / math.pi)
    return ContourResult(float(T), float(value), float(line.real), residue, cj.m1, est + carried)


def pole_principal_check(cj: CjCoefficients, radius: float = 1e-2, X: float = DEFAULT_X,
                         engine: MomentEngine | None = None) -> tuple[float, np.ndarray]:
    """(s-1)^5 Z_2(s) at s = 1 + radius * {1, i, -1, -i}, and its average.

    The average cancels the c4..c2 terms of the Laurent expansion exactly
    and leaves c5 + c1 radius^4 plus the regular part times radius^5.
    """
    d = radius * np.array([1, 1j, -1, -1j])
    values = np.array([z2_continued(1.0 + di, cj, X, engine=engine).value for di in d])
    scaled = values * d ** 5
    return float(np.mean(scaled).real), scaled


def convolution_recurrence_check(k: int, l: int, s: complex, c: float, Tmax: float, X: float,
                                 engine: MomentEngine | None = None) -> IdentityResult:
    """Z_(k+l)(s) against (1 / 2 pi i) int_(c) Z_l(w) Z_k(s+1-w) dw, all truncated at X.

    Truncating every transform at the same X keeps the identity exact, so
    the budget is only the line truncation estimate plus quadrature slack.
    """
    s = complex(s)
    if not (s.real > 1 + CONVERGENCE_MARGIN and c > 1 + CONVERGENCE_MARGIN
            and s.real + 1 - c > 1 + CONVERGENCE_MARGIN):
        raise DomainError("convolution_recurrence_check needs sigma, c and sigma + 1 - c above 1")
    lhs = zk_direct(k + l, s, X)
    v = line_grid(Tmax)
    w = c + 1j * v
    Fl = _zk_values(l, w, X, None)[0]
    Fk = _zk_values(k, s + 1.0 - w, X, None)[0]
    vals = Fl * Fk
    _decay_check(v, vals, 1.0, "convolution_recurrence_check")
    rhs, est = line_integral(vals, v, tmax=Tmax, mode="algebraic")
    return IdentityResult(f"recurrence_k{k}_l{l}", lhs.value, rhs, est + 1e-9 * abs(lhs.value))
