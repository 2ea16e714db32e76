"""Named numerical checks grouped by pipeline stage.

Each suite function returns a list of :class:`CheckRecord`. The batch driver
writes them into run reports, and the acceptance tests assert on the same
records, so a check is defined exactly once.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import mellin as ml
from . import spectral as sp
from .errors import CoverageError, ZetaMellinError
from .moments import (A4, MomentEngine, P4Coefficients, dyadic_sup, e2, e2_running_profile, fit_p4,
                      loglog_slope, sign_changes)
from .zeta import z_deriv_remainder, z_hardy, z_hardy_deriv, zeta_em
from .zeta.evaluate import em_terms

logger = logging.getLogger(__name__)

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"


@dataclass(frozen=True)
class CheckRecord:
    """One executed (or skipped) check: both sides, their distance and the allowed budget."""

    name: str
    lhs: float
    rhs: float
    diff: float
    budget: float
    status: str
    detail: str = ""

    @classmethod
    def judge(cls, name: str, lhs, rhs, budget: float, *, diff: float | None = None,
              detail: str = "") -> "CheckRecord":
        """Pass iff diff <= budget; ``diff`` defaults to |lhs - rhs|."""
        lhs, rhs = float(np.real(lhs)), float(np.real(rhs))
        d = abs(lhs - rhs) if diff is None else float(diff)
        ok = bool(np.isfinite(d)) and d <= budget
        return cls(name, lhs, rhs, d, float(budget), PASS if ok else FAIL, detail)

    @classmethod
    def skipped(cls, name: str, reason: str) -> "CheckRecord":
        nan = float("nan")
        return cls(name, nan, nan, nan, nan, SKIPPED, reason)

    @property
    def passed(self) -> bool:
        return self.status == PASS


def _identity(name: str, res: ml.IdentityResult, budget: float, *, relative: bool = False,
              detail: str = "") -> CheckRecord:
    diff = res.rel_diff if relative else res.abs_diff
    return CheckRecord.judge(name, abs(res.lhs), abs(res.rhs), budget, diff=diff, detail=detail)


# --------------------------------------------------------------------------
# Hardy function
# --------------------------------------------------------------------------

ORACLE_TOL = 1e-8
ORACLE_TERMS_SHIFT = 37


def oracle_check(n: int = 200, lo: float = 10.0, hi: float = 500.0, seed: int = 20240601) -> CheckRecord:
    """max | |z_hardy(t)| - |zeta(1/2+it)| | over random t, against a separately truncated Euler-Maclaurin sum.

    The oracle uses a longer direct sum than the production path, so the
    two Euler-Maclaurin evaluations below the Riemann-Siegel crossover do
    not share a truncation point.
    """
    t = np.sort(np.random.default_rng(seed).uniform(lo, hi, n))
    z = np.abs(z_hardy(t))
    terms = em_terms(0.5 + 1j * t) + ORACLE_TERMS_SHIFT
    ref = np.array([abs(zeta_em(0.5 + 1j * ti, terms=int(N))[0]) for ti, N in zip(t, terms)])
    err = np.abs(z - ref)
    i = int(np.argmax(err))
    return CheckRecord.judge("zeta_oracle", z[i], ref[i], ORACLE_TOL, diff=float(err[i]),
                             detail=f"{n} points on [{lo}, {hi}], worst t = {float(t[i])!r}")


FD_STEPS = {1: 1e-4, 2: 1e-2}


def _finite_difference(t: np.ndarray, k: int, h: float) -> np.ndarray:
    if k == 1:
        return (z_hardy(t + h) - z_hardy(t - h)) / (2 * h)
    return (z_hardy(t + h) - 2 * z_hardy(t) + z_hardy(t - h)) / h ** 2


def derivative_checks(n: int = 20, lo: float = 50.0, hi: float = 1000.0,
                      seed: int = 7) -> list[CheckRecord]:
    """Main sum of the Z^(k) expansion against central differences of Z, k = 1, 2.

    The band is the expansion remainder (implied constant 1) plus the
    finite-difference truncation and rounding error.
    """
    t = np.sort(np.random.default_rng(seed).uniform(lo, hi, n))
    out = []
    for k in (1, 2):
        h = FD_STEPS[k]
        fd = _finite_difference(t, k, h)
        main = z_hardy_deriv(t, k)
        # truncation h^2 |Z^(k+2)|/6 bounded through the main sum two orders up; rounding 1e-11/h^k
        trunc = h ** 2 / 6 * (np.abs(z_hardy_deriv(t, k + 2)) + z_deriv_remainder(t, k + 2))
        band = z_deriv_remainder(t, k) + trunc + 4e-11 / h ** k
        ratio = np.abs(main - fd) / band
        i = int(np.argmax(ratio))
        out.append(CheckRecord.judge(f"z_deriv_k{k}", main[i], fd[i], float(band[i]),
                                     detail=f"{n} points on [{lo}, {hi}], worst band ratio {ratio[i]:.3g}"))
    return out


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

FIT_SPAN = (500.0, 5000.0)
FIT_POINTS = 4000
A4_REL_TOL = 0.15
MIN_SIGN_CHANGES = 10
TREND_SLACK = 0.2


def fit_grid(span: tuple[float, float] = FIT_SPAN, points: int = FIT_POINTS) -> np.ndarray:
    return np.linspace(span[0], span[1], points)


def a4_recovery_check(engine: MomentEngine, span=FIT_SPAN) -> CheckRecord:
    """Free five-coefficient fit of M(T)/T; the leading coefficient against 1/(2 pi^2)."""
    free = fit_p4(fit_grid(span), engine=engine, pin_a4=False)
    rel = abs(free.a[4] - A4) / A4
    return CheckRecord.judge("a4_free_fit", free.a[4], A4, A4_REL_TOL, diff=rel,
                             detail=f"relative error over T in [{span[0]}, {span[1]}]")


@dataclass
class E2Trend:
    """Statistics for the growth of E2 on a grid."""

    T: np.ndarray
    E2: np.ndarray
    sign_changes: int
    block_ends: np.ndarray
    block_sup_ratio: np.ndarray     # sup over block of |E2| / T_end^(2/3)
    sup_slope: float
    mean_square_ratio: np.ndarray   # int_0^T E2^2 / T^2 on the grid
    mean_square_slope: float


def e2_trend(coeffs: P4Coefficients, engine: MomentEngine, lo: float = 100.0, hi: float = 5000.0,
             step: float = 1.0) -> E2Trend:
    """Sign changes of E2 and log-log slopes of its sup and mean-square statistics."""
    T = np.arange(lo, hi + step / 2, step)
    E = e2(T, coeffs, engine)
    ends, sups = dyadic_sup(T, E, lo, hi)
    ratio = sups / ends ** (2.0 / 3.0)
    ms = e2_running_profile(T, coeffs, 2, engine) / T ** 2
    return E2Trend(T, E, sign_changes(E), ends, ratio, loglog_slope(ends, ratio), ms, loglog_slope(T, ms))


def e2_checks(trend: E2Trend) -> list[CheckRecord]:
    """At least 10 sign changes; neither statistic trends upward beyond the slack."""
    return [
        CheckRecord.judge("e2_sign_changes", trend.sign_changes, MIN_SIGN_CHANGES, 0.0,
                          diff=max(0, MIN_SIGN_CHANGES - trend.sign_changes),
                          detail=f"on [{trend.T[0]}, {trend.T[-1]}]"),
        CheckRecord.judge("e2_sup_trend", trend.sup_slope, 0.0, TREND_SLACK, diff=max(0.0, trend.sup_slope),
                          detail="log-log slope of dyadic sup |E2| / T^(2/3)"),
        CheckRecord.judge("e2_mean_square_trend", trend.mean_square_slope, 0.0, TREND_SLACK,
                          diff=max(0.0, trend.mean_square_slope),
                          detail="log-log slope of int_0^T E2^2 / T^2"),
    ]


# --------------------------------------------------------------------------
# Mellin identities
# --------------------------------------------------------------------------

INVERSION_TOL = 1e-3
CONVOLUTION_TOL = 1e-4
PARSEVAL_TOL = 1e-4
PARSEVAL_E2_REL = 0.02
PARSEVAL_E2_TMAX = 200.0
MEAN_VALUE_SLACK = 1e-6
MEAN_VALUE_CASES = 50


def inversion_checks(Tmax: float = 1e3, seed: int = 11) -> list[CheckRecord]:
    """Forward transform by quadrature, then the truncated inverse, at 20 random x."""
    xs = np.random.default_rng(seed).uniform(1.1, 10.0, 20)
    out = []
    f = ml.power_function(2.0, 1e4)
    back = ml.mellin_inverse(lambda s: ml.mellin_truncated(f, s)[0], xs, 2.0, Tmax)
    err = np.abs(back - xs ** -2.0)
    i = int(np.argmax(err))
    out.append(CheckRecord.judge("inversion_power", back[i], xs[i] ** -2.0, INVERSION_TOL, diff=err[i],
                                 detail=f"f = x^-2, sigma = 2, Tmax = {Tmax}"))
    g = ml.indicator_function(1.0, 2.0)
    back = ml.mellin_inverse(lambda s: ml.mellin_truncated(g, s)[0], xs, 1.0, Tmax)
    exact = (xs <= 2.0).astype(float)
    # the truncated inverse converges only away from the jump at x = 2
    keep = np.abs(xs - 2.0) > 0.05
    err = np.abs(back - exact)[keep]
    i = int(np.argmax(err))
    out.append(CheckRecord.judge("inversion_indicator", back[keep][i], exact[keep][i], INVERSION_TOL,
                                 diff=err[i], detail=f"f = 1[1,2], sigma = 1, Tmax = {Tmax}"))
    return out


def convolution_checks(Tmax: float = 1e3) -> list[CheckRecord]:
    """Line convolution of two transforms against the transform of the product."""
    cases = [
        ("convolution_power", ml.power_transform(2.0), ml.power_transform(2.0), 2.0, 1.5, 1.0 / 5.0),
        ("convolution_power_indicator", ml.power_transform(1.5), ml.indicator_transform(1.0, 3.0), 2.0, 1.2,
         complex(ml.indicator_transform(1.0, 3.0)(3.5))),
    ]
    out = []
    for name, F, G, s, c, exact in cases:
        val = ml.convolve_lines(F, G, s, c, Tmax)
        out.append(CheckRecord.judge(name, abs(val), abs(exact), CONVOLUTION_TOL, diff=abs(val - exact),
                                     detail=f"s = {s}, line sigma = {c}, Tmax = {Tmax}"))
    return out


def parseval_checks(Tmax: float = 1e3) -> list[CheckRecord]:
    out = []
    for name, f, sigma in (("parseval_power", ml.power_function(2.0, 1e4), 1.0),
                           ("parseval_indicator", ml.indicator_function(1.0, 2.0), 1.0)):
        res = ml.parseval_pair(f, sigma, Tmax=Tmax, name=name)
        out.append(_identity(name, res, PARSEVAL_TOL, detail=f"sigma = {sigma}, Tmax = {Tmax}"))
    return out


def parseval_e2_check(coeffs: P4Coefficients, engine: MomentEngine, sigma: float = 0.75,
                      X: float = 1e3, Tmax: float = PARSEVAL_E2_TMAX) -> CheckRecord:
    """Parseval for f = E2(x)/x on [1, X], judged by relative difference."""
    res = ml.parseval_pair(ml.e2_over_x(coeffs, X, engine), sigma, Tmax=Tmax, name="parseval_e2")
    return _identity("parseval_e2", res, PARSEVAL_E2_REL, relative=True,
                     detail=f"sigma = {sigma}, X = {X}, Tmax = {Tmax}; diff is relative")


def mean_value_check(cases: int = MEAN_VALUE_CASES, seed: int = 5) -> CheckRecord:
    """Largest ratio of the mean-square inequality over random trigonometric/power test functions."""
    rng = np.random.default_rng(seed)
    worst, where = -math.inf, ""
    for _ in range(cases):
        a = float(rng.uniform(2.0, 10.0))
        b = a + float(rng.uniform(1.0, 20.0))
        sigma = float(rng.uniform(0.5, 2.0))
        T = float(rng.uniform(10.0, 200.0))
        amp = rng.normal(size=3)
        freq = rng.uniform(0.1, 5.0, 3)
        p = float(rng.uniform(-1.0, 1.0))

        def g(x, amp=amp, freq=freq, p=p):
            return x ** p * (amp[0] + amp[1] * np.cos(freq[1] * x) + amp[2] * np.sin(freq[2] * np.log(x)))

        r = ml.mean_value_ratio(g, a, b, sigma, T)
        if r > worst:
            worst, where = r, f"[{a:.3f}, {b:.3f}], sigma = {sigma:.3f}, T = {T:.1f}"
    return CheckRecord.judge("mean_value_ratio", worst, 1.0, MEAN_VALUE_SLACK, diff=max(0.0, worst - 1.0),
                             detail=f"max over {cases} cases at {where}")


# --------------------------------------------------------------------------
# continuation
# --------------------------------------------------------------------------

OVERLAP_POINTS = (2.0, 3.0 + 10j, 1.5 + 20j, 2.5 - 7j, 1.5, 2.0 + 5j, 3.0 - 25j, 1.8 + 40j, 4.0, 2.2 - 15j)
POLE_REL_TOL = 0.01


def continuation_checks(cj: ml.CjCoefficients, engine: MomentEngine, X: float = ml.DEFAULT_X,
                        points: Sequence[complex] = OVERLAP_POINTS) -> list[CheckRecord]:
    """Direct Z_2 against the continued form on sigma > 1, judged by the sum of both budgets."""
    out = []
    for s in points:
        d = ml.z2_direct(s, X)
        c = ml.z2_continued(s, cj, X, engine=engine)
        out.append(CheckRecord.judge(f"z2_overlap_{s}", abs(d.value), abs(c.value), d.trunc_err + c.trunc_err,
                                     diff=abs(d.value - c.value), detail=f"X = {X}"))
    return out


def pole_check(cj: ml.CjCoefficients, engine: MomentEngine, radius: float = 1e-2,
               X: float = ml.DEFAULT_X) -> CheckRecord:
    mean, _ = ml.pole_principal_check(cj, radius, X, engine)
    c5 = cj.c[5]
    return CheckRecord.judge("pole_c5", mean, c5, POLE_REL_TOL, diff=abs(mean - c5) / abs(c5),
                             detail=f"|s-1| = {radius}; diff is relative")


def recurrence_check(X: float = 1e3, Tmax: float = 200.0) -> CheckRecord:
    res = ml.convolution_recurrence_check(1, 1, 4.0, 2.0, Tmax, X)
    return _identity(res.check, res, res.budget, detail=f"s = 4, c = 2, X = {X}, Tmax = {Tmax}")


def contour_check(cj: ml.CjCoefficients, engine: MomentEngine, T: float = 500.0, sigma_c: float = 0.75,
                  Vmax: float = 100.0, X: float = ml.DEFAULT_X) -> CheckRecord:
    """E2(T) from the line integral plus residue, against the moment engine."""
    r = ml.e2_contour(T, sigma_c, Vmax, cj, X, engine=engine)
    direct = float(e2(T, cj.source, engine))
    return CheckRecord.judge("e2_contour", r.value, direct, r.trunc_err,
                             detail=f"T = {T}, sigma_c = {sigma_c}, Vmax = {Vmax}")


# --------------------------------------------------------------------------
# I_sigma
# --------------------------------------------------------------------------

I_SIGMA_T = (50.0, 100.0, 200.0, 400.0)
I_SIGMA_SLOPE_RANGE = (0.1, 2.2)


@dataclass
class ISigmaRow:
    sigma: float
    T: tuple
    values: np.ndarray
    slope: float


def i_sigma_table(cj: ml.CjCoefficients, engine: MomentEngine, sigmas: Sequence[float] = (0.6, 0.75, 0.9),
                  T: Sequence[float] = I_SIGMA_T, X: float = ml.DEFAULT_X) -> list[ISigmaRow]:
    rows = []
    for sigma in sigmas:
        vals = ml.i_sigma_profile(sigma, T, cj, X, engine=engine)
        rows.append(ISigmaRow(float(sigma), tuple(T), vals, loglog_slope(np.asarray(T), vals)))
    return rows


def i_sigma_check(row: ISigmaRow) -> CheckRecord:
    lo, hi = I_SIGMA_SLOPE_RANGE
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return CheckRecord.judge(f"i_sigma_slope_{row.sigma}", row.slope, mid, half,
                             detail=f"slope over T = {list(row.T)} must lie in [{lo}, {hi}]")


# --------------------------------------------------------------------------
# saddle point
# --------------------------------------------------------------------------

SADDLE_GRID = ((10.0, 1e4), (10.0, 1e6), (50.0, 1e5), (100.0, 1e3), (3.0, 50.0), (200.0, 1e7))
REMAINDER_SLOPE = (3.0, 0.3)
DFDT_POINT = (50.0, 1e5)
DFDT_SCALE = 0.1


def saddle_checks() -> list[CheckRecord]:
    out = []
    worst, where = 0.0, None
    for r, T in SADDLE_GRID:
        z0 = sp.saddle_z0(r, T)
        rel = abs(sp.saddle_dF(z0, r, T)) / max(1.0, r / z0)
        if rel >= worst:
            worst, where = rel, (r, T)
    out.append(CheckRecord.judge("saddle_residual", worst, 0.0, 1e-10,
                                 detail=f"max |F'(z0)| / max(1, r/z0) over {len(SADDLE_GRID)} (r, T), worst at {where}"))
    z, r, T, h = 10.0, 10.0, 1e4, 1e-5
    fd = (sp.saddle_F(z + h, r, T) - sp.saddle_F(z - h, r, T)) / (2 * h)
    out.append(CheckRecord.judge("saddle_dF_fd", sp.saddle_dF(z, r, T), fd, 1e-6, detail="(z, r, T) = (10, 10, 1e4)"))
    r, T = 10.0, 1e6
    z0 = sp.saddle_z0(r, T)
    out.append(CheckRecord.judge("saddle_z0_leading", z0, r * (1 + r / (2 * T)), r * (r / T) ** 2,
                                 detail="r = 10, T = 1e6 against 1 + r/2T"))
    target, tol = REMAINDER_SLOPE
    slope = sp.saddle_remainder_slope(10.0, (1e4, 1e5, 1e6))
    out.append(CheckRecord.judge("saddle_remainder_slope", slope, target, tol,
                                 detail="log-log slope of |z0/r - (1 + r/2T + r^2/8T^2)| at r = 10"))
    r, T = DFDT_POINT
    d = sp.saddle_value_T_derivative(r, T)
    need = DFDT_SCALE * (r / T) ** 2
    out.append(CheckRecord.judge("saddle_dFdT_positive", d, (r / T) ** 2, 0.0, diff=max(0.0, need - d),
                                 detail=f"d/dT F(z0) at (r, T) = ({r}, {T}) must be >= {DFDT_SCALE} (r/T)^2"))
    return out


# --------------------------------------------------------------------------
# spectral sums
# --------------------------------------------------------------------------

SPECTRAL_TOL = 1e-12


def hand_fold(records, K: float, tau: float) -> complex:
    """conj3 sum written out term by term with cmath."""
    total = 0j
    for rec in records:
        if K - 1 <= rec.kappa <= K + 1:
            total += rec.alpha * rec.h_half ** 3 * cmath.exp(1j * rec.kappa * math.log(rec.kappa / tau))
    return total


def fixture_checks(ds: sp.SpectralDataset | None = None) -> list[CheckRecord]:
    """Exact identities of the windowed sums on the synthetic fixture."""
    ds = ds or sp.synthetic_fixture()
    lo, hi = ds.coverage
    Ks = np.arange(lo + 1.0, hi - 1.0 + 1e-9, 0.25)
    taus = (1.0, 7.5, 10.5, 100.0)
    tri = 0.0
    for K in Ks:
        s = sp.sum_window(ds, K, 1.0)
        for tau in taus:
            tri = max(tri, abs(sp.conj3_sum(ds, K, tau)) - s)
    out = [CheckRecord.judge("spectral_triangle", tri, 0.0, SPECTRAL_TOL, diff=max(0.0, tri),
                             detail="max of |conj3_sum| - sum_window(K, 1)")]
    worst = 0.0
    for rec in ds.records:
        K = min(max(rec.kappa, lo + 1.0), hi - 1.0)
        if sum(1 for r in ds.records if K - 1 <= r.kappa <= K + 1) == 1:
            worst = max(worst, abs(sp.conj3_sum(ds, K, rec.kappa) - sp.weight(rec)))
    out.append(CheckRecord.judge("spectral_phase_vanishing", worst, 0.0, SPECTRAL_TOL,
                                 detail="single-record windows with tau = kappa_j"))
    add = 0.0
    for K in Ks:
        for G in (0.25, 0.5, 1.0):
            if K - G < lo or K + G > hi:
                continue
            whole = sp.sum_window(ds, K, G)
            parts = sp.sum_window(ds, K - G / 2, G / 2) + sp.sum_half_open(ds, K, K + G)
            add = max(add, abs(whole - parts))
    out.append(CheckRecord.judge("spectral_additivity", add, 0.0, SPECTRAL_TOL,
                                 detail="[K-G, K+G] against [K-G, K] + (K, K+G]"))
    fold = 0.0
    for K in Ks:
        for tau in taus:
            fold = max(fold, abs(sp.conj3_sum(ds, K, tau) - hand_fold(ds.records, K, tau)))
            fold = max(fold, abs(sp.conj3_sum(ds, K, tau, conjugate=True)
                                 - hand_fold(ds.records, K, tau).conjugate()))
    out.append(CheckRecord.judge("spectral_hand_fold", fold, 0.0, SPECTRAL_TOL,
                                 detail="conj3_sum and its conjugate against a term-by-term fold"))
    return out


@dataclass
class SpectralScans:
    unit: sp.UnitWindowScan | None
    sup: sp.ScanResult | None
    checks: list


def data_scans(ds: sp.SpectralDataset | None, T: float = 500.0, delta: float = 0.2,
               C: float = 1.0) -> SpectralScans:
    """Unit-window boundedness scan and the sup scan on user-supplied data.

    Without data, or when the data do not reach the scan range, the scans
    are recorded as skipped with the reason.
    """
    names = ("spectral_unit_window_scan", "spectral_sup_scan")
    if ds is None:
        return SpectralScans(None, None, [CheckRecord.skipped(n, "no spectral dataset supplied") for n in names])
    checks = []
    unit = sup = None
    try:
        unit = sp.unit_window_scan(ds)
        checks.append(CheckRecord(names[0], unit.max_ratio, 0.0, 0.0, math.inf, PASS,
                                  f"max sum_window(K, 1) / K^1.01 over {len(unit.K)} K (statistic archived)"))
    except ZetaMellinError as exc:
        checks.append(CheckRecord.skipped(names[0], str(exc)))
    try:
        sup = sp.conj3_sup_scan(ds, T, delta, C)
        checks.append(CheckRecord(names[1], sup.sup / math.sqrt(T), 0.0, 0.0, math.inf, PASS,
                                  f"sup / sqrt(T) at T = {T}, delta = {delta}, C = {C}, K* = {sup.K_star!r}"))
    except CoverageError as exc:
        checks.append(CheckRecord.skipped(names[1], str(exc)))
    return SpectralScans(unit, sup, checks)
