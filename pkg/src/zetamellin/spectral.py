"""Spectral data of Maass cusp forms and the Hecke-series sums built from it.

Each record carries the spectral parameter kappa_j, the normalised weight
alpha_j = |rho_j(1)|^2 / cosh(pi kappa_j), the central value H_j(1/2) and
the parity. Every sum below runs over records inside an explicit kappa
window, and a window reaching outside the loaded data raises instead of
quietly dropping terms.

The second half holds the saddle-point function of the Gaussian-smoothed
zeta transform and the diagnostics attached to its root.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import mpmath
import numpy as np

from .errors import BracketError, CoverageError, DataError, DomainError
from .numerics import BumpSpec, r1, smooth_bump
from .quadrature import gl_rule

logger = logging.getLogger(__name__)

HEADER = ["kappa", "alpha", "h_half", "parity"]


@dataclass(frozen=True)
class SpectralRecord:
    kappa: float
    alpha: float
    h_half: float
    parity: int

    def __post_init__(self):
        if not self.kappa > 0:
            raise DataError(f"kappa must be positive, got {self.kappa}")
        if not self.alpha > 0:
            raise DataError(f"alpha must be positive, got {self.alpha}")
        if not self.h_half >= 0:
            raise DataError(f"h_half must be nonnegative, got {self.h_half}")
        if self.parity not in (-1, 1):
            raise DataError(f"parity must be -1 or 1, got {self.parity}")


def weight(rec: SpectralRecord) -> float:
    """alpha_j H_j(1/2)^3."""
    return rec.alpha * rec.h_half ** 3


@dataclass
class SpectralDataset:
    """Records sorted by kappa, column arrays, and the checksum of the source file."""

    records: tuple[SpectralRecord, ...]
    checksum: str = ""
    source: str = ""
    declared: tuple[float, float] | None = None
    kappa: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.kappa = np.array([r.kappa for r in self.records], dtype=float)
        self.weights = np.array([weight(r) for r in self.records], dtype=float)
        if len(self.kappa) > 1 and np.any(np.diff(self.kappa) <= 0):
            raise DataError("spectral records must have strictly increasing kappa")
        if self.declared is not None:
            lo, hi = self.declared
            if not lo <= hi or (len(self.kappa) and (self.kappa[0] < lo or self.kappa[-1] > hi)):
                raise DataError(f"declared coverage {self.declared} must contain every record")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def coverage(self) -> tuple[float, float] | None:
        """Declared coverage if given (a table known complete on a wider range), else [kappa_min, kappa_max]."""
        if self.declared is not None:
            return float(self.declared[0]), float(self.declared[1])
        if not len(self.records):
            return None
        return float(self.kappa[0]), float(self.kappa[-1])

    def require(self, lo: float, hi: float, what: str = "query") -> None:
        """Raise CoverageError unless [lo, hi] lies inside the data coverage."""
        cov = self.coverage
        if cov is None:
            raise CoverageError(f"{what}: the spectral dataset is empty")
        if lo < cov[0] or hi > cov[1]:
            raise CoverageError(f"{what}: window [{lo}, {hi}] leaves coverage [{cov[0]}, {cov[1]}]")

    def window(self, lo: float, hi: float, *, closed_left: bool = True) -> slice:
        """Index slice of records with lo <= kappa <= hi (lo < kappa if not closed_left)."""
        side = "left" if closed_left else "right"
        i = int(np.searchsorted(self.kappa, lo, side=side))
        j = int(np.searchsorted(self.kappa, hi, side="right"))
        return slice(i, max(i, j))


def load_spectral(path: str | Path, coverage: tuple[float, float] | None = None) -> SpectralDataset:
    """Read a ``kappa,alpha,h_half,parity`` CSV.

    ``coverage`` declares the kappa range on which the table is complete;
    by default it is [first kappa, last kappa].

    Raises
    ------
    DataError
        On a bad header, unparsable or invariant-violating rows (with the
        file row number), or kappa not strictly increasing.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read spectral data {path}: {exc}") from exc
    lines = raw.decode("utf-8").splitlines()
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != HEADER:
        raise DataError(f"{path}: header must be {','.join(HEADER)}, got {header}")
    records = []
    last = -math.inf
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise DataError(f"{path}:{row_no}: expected 4 fields, got {len(row)}")
        try:
            kappa, alpha, h_half = (float(c) for c in row[:3])
            parity_f = float(row[3])
        except ValueError as exc:
            raise DataError(f"{path}:{row_no}: non-numeric field in {row}") from exc
        if parity_f != int(parity_f):
            raise DataError(f"{path}:{row_no}: parity must be -1 or 1, got {row[3]}")
        try:
            rec = SpectralRecord(kappa, alpha, h_half, int(parity_f))
        except DataError as exc:
            raise DataError(f"{path}:{row_no}: {exc}") from None
        if not kappa > last:
            raise DataError(f"{path}:{row_no}: kappa {kappa} does not exceed previous {last} (unsorted input)")
        last = kappa
        records.append(rec)
    ds = SpectralDataset(tuple(records), hashlib.sha256(raw).hexdigest(), str(path), coverage)
    logger.info("loaded %d spectral records from %s", len(ds), path)
    return ds


def export_spectral(ds: SpectralDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in ds.records:
            w.writerow([repr(r.kappa), repr(r.alpha), repr(r.h_half), r.parity])


FIXTURE_COVERAGE = (0.0, 14.0)


def synthetic_fixture() -> SpectralDataset:
    """The three-record synthetic dataset shipped with the package (not real eigenvalues).

    The fixture is a complete spectrum by construction, so it declares
    coverage [0, 14]; unit windows holding a single record are then legal.
    """
    ref = resources.files("zetamellin") / "data" / "synthetic_spectral.csv"
    with resources.as_file(ref) as p:
        return load_spectral(p, FIXTURE_COVERAGE)


# --------------------------------------------------------------------------
# windowed sums
# --------------------------------------------------------------------------

def sum_window(ds: SpectralDataset, K: float, G: float) -> float:
    """sum of alpha_j H_j(1/2)^3 over K - G <= kappa_j <= K + G."""
    if G < 0:
        raise DomainError(f"sum_window needs G >= 0, got {G}")
    ds.require(K - G, K + G, "sum_window")
    return float(np.sum(ds.weights[ds.window(K - G, K + G)]))


def sum_half_open(ds: SpectralDataset, lo: float, hi: float) -> float:
    """Sum over lo < kappa_j <= hi (used to split windows without double counting)."""
    ds.require(lo, hi, "sum_half_open")
    return float(np.sum(ds.weights[ds.window(lo, hi, closed_left=False)]))


def _phase(kappa: np.ndarray, tau: float) -> np.ndarray:
    return np.exp(1j * kappa * np.log(kappa / tau))


def conj3_sum(ds: SpectralDataset, K: float, tau: float, *, conjugate: bool = False) -> complex:
    """sum over K-1 <= kappa_j <= K+1 of alpha_j H_j^3(1/2) exp(i kappa_j log(kappa_j / tau)).

    ``conjugate=True`` flips the sign of kappa in the phase.
    """
    if tau <= 0:
        raise DomainError(f"conj3_sum needs tau > 0, got {tau}")
    ds.require(K - 1, K + 1, "conj3_sum")
    sl = ds.window(K - 1, K + 1)
    ph = _phase(ds.kappa[sl], tau)
    if conjugate:
        ph = np.conj(ph)
    total = 0j
    for wj, pj in zip(ds.weights[sl], ph):  # index-ordered fold
        total += wj * pj
    return complex(total)


@dataclass
class ScanResult:
    """Grid of K with the exponential sum at each point; ``K_star`` attains the sup."""

    K: np.ndarray
    tau: float
    values: np.ndarray
    K_star: float
    sup: float

    def write_csv(self, path: str | Path) -> None:
        write_scan_csv([self], path)


def write_scan_csv(scans, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "tau", "re", "im", "abs"])
        for sc in scans:
            for K, v in zip(sc.K, sc.values):
                w.writerow([repr(float(K)), repr(float(sc.tau)), repr(float(v.real)),
                            repr(float(v.imag)), repr(float(abs(v)))])


def conj3_sup_scan(ds: SpectralDataset, T: float, delta: float, C: float) -> ScanResult:
    """sup of |conj3_sum(K, C T)| over K = T^(1-delta), T^(1-delta) + 1, ... <= T^(1+delta)."""
    if not 0 < delta < 1:
        raise DomainError(f"conj3_sup_scan needs 0 < delta < 1, got {delta}")
    lo, hi = T ** (1 - delta), T ** (1 + delta)
    ds.require(lo - 1, hi + 1, "conj3_sup_scan")
    K = lo + np.arange(int(math.floor(hi - lo)) + 1)
    tau = C * T
    vals = np.array([conj3_sum(ds, k, tau) for k in K])
    i = int(np.argmax(np.abs(vals)))
    return ScanResult(K, tau, vals, float(K[i]), float(abs(vals[i])))


@dataclass
class UnitWindowScan:
    K: np.ndarray
    sums: np.ndarray
    exponent: float

    @property
    def ratios(self) -> np.ndarray:
        return self.sums / self.K ** self.exponent

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if len(self.K) else 0.0


def unit_window_scan(ds: SpectralDataset, exponent: float = 1.01, step: float = 1.0) -> UnitWindowScan:
    """sum_window(K, 1) / K^exponent on a grid of K spanning the data coverage."""
    cov = ds.coverage
    if cov is None:
        raise CoverageError("unit_window_scan: the spectral dataset is empty")
    K = np.arange(cov[0] + 1, cov[1] - 1 + 1e-9, step)
    sums = np.array([sum_window(ds, k, 1.0) for k in K])
    return UnitWindowScan(K, sums, exponent)


def e2_spectral_sum(ds: SpectralDataset, T: float, Delta: float, tau: float, Kmax: float) -> complex:
    """sum over kappa_j <= Kmax of alpha_j H_j^3 kappa_j^(-3/2) exp(i kappa_j log(kappa_j/tau) - (Delta kappa_j/T)^2).

    The admissible range sqrt(T) <= Delta <= T^(2/3) log T is only warned
    about, since the sum is exploratory outside it.
    """
    cov = ds.coverage
    if cov is None:
        raise CoverageError("e2_spectral_sum: the spectral dataset is empty")
    if Kmax > cov[1]:
        raise CoverageError(f"e2_spectral_sum: Kmax = {Kmax} beyond coverage max {cov[1]}")
    if not math.sqrt(T) <= Delta <= T ** (2 / 3) * math.log(T):
        logger.warning("e2_spectral_sum: Delta = %g outside [T^1/2, T^2/3 log T] for T = %g", Delta, T)
    sl = ds.window(0.0, Kmax)
    k = ds.kappa[sl]
    with np.errstate(under="ignore", over="ignore"):
        terms = ds.weights[sl] * k ** -1.5 * np.exp(1j * k * np.log(k / tau) - (Delta * k / T) ** 2)
    total = 0j
    for term in terms:
        total += term
    return complex(total)


# --------------------------------------------------------------------------
# I(T, t)
# --------------------------------------------------------------------------

PHI_SPEC = BumpSpec(0.5, 1.0, 2.0, 2.5)
_PHI_NODES = 48


def _phi_rule():
    # GL rule on each smooth piece of Phi: the two ramps and the plateau
    x, w = gl_rule(_PHI_NODES)
    nodes, weights = [], []
    for a, b in ((0.5, 1.0), (1.0, 2.0), (2.0, 2.5)):
        nodes.append(0.5 * (b - a) * (x + 1) + a)
        weights.append(0.5 * (b - a) * w)
    xs, ws = np.concatenate(nodes), np.concatenate(weights)
    return xs, ws * smooth_bump(PHI_SPEC)(xs)


def phi_integral(T: float, freq) -> np.ndarray:
    """int_{1/2}^{5/2} Phi(x) (T x)^(i freq) dx for each frequency."""
    xs, ws = _phi_rule()
    f = np.atleast_1d(np.asarray(freq, dtype=float))
    vals = np.exp(1j * np.outer(f, np.log(T * xs))) @ ws
    return vals if np.ndim(freq) else complex(vals[0])


def _i_window(ds: SpectralDataset, T: float, t: float, eps_window: float, what: str):
    half = T ** eps_window
    ds.require(t - half, t + half, what)
    return ds.window(t - half, t + half)


def i_Tt(ds: SpectralDataset, T: float, t: float, eps_window: float) -> complex:
    """sum over |kappa_j - t| <= T^eps of alpha_j H_j^3 R1(-kappa_j)/(1/2 - i kappa_j) int Phi(x)(Tx)^(i(t-kappa_j)) dx."""
    sl = _i_window(ds, T, t, eps_window, "i_Tt")
    k = ds.kappa[sl]
    if not len(k):
        return 0j
    terms = ds.weights[sl] * r1(-k) / (0.5 - 1j * k) * phi_integral(T, t - k)
    return complex(np.sum(terms))


def i_Tt_bound(ds: SpectralDataset, T: float, t: float, eps_window: float) -> float:
    """Triangle-inequality bound for :func:`i_Tt`."""
    sl = _i_window(ds, T, t, eps_window, "i_Tt_bound")
    k = ds.kappa[sl]
    if not len(k):
        return 0.0
    phi_mass = float(np.sum(_phi_rule()[1]))
    return float(np.sum(ds.weights[sl] * np.abs(r1(-k)) / np.abs(0.5 - 1j * k)) * phi_mass)


def i_Tt_asymptotic(ds: SpectralDataset, T: float, t: float, eps_window: float) -> complex:
    """pi (2t)^(-3/2) sum alpha_j H_j^3 exp(i kappa_j log(kappa_j / 4e)) int Phi(x)(Tx)^(i(t-kappa_j)) dx."""
    sl = _i_window(ds, T, t, eps_window, "i_Tt_asymptotic")
    k = ds.kappa[sl]
    if not len(k):
        return 0j
    phase = np.exp(1j * k * np.log(k / (4.0 * math.e)))
    terms = ds.weights[sl] * phase * phi_integral(T, t - k)
    return complex(math.pi * (2.0 * t) ** -1.5 * np.sum(terms))


# --------------------------------------------------------------------------
# saddle point
# --------------------------------------------------------------------------

def _check_saddle_domain(z, r, T):
    if np.any(np.asarray(z) <= 0) or r <= 0 or T <= 0:
        raise DomainError(f"saddle functions need z, r, T > 0 (z={z}, r={r}, T={T})")


def saddle_F(z, r: float, T: float):
    """F(z; r, T) = -r log z + T log(1 + z/T) + 2r log(1 + sqrt(1 + z/T))."""
    _check_saddle_domain(z, r, T)
    zz = np.asarray(z, dtype=float)
    u = zz / T
    out = -r * np.log(zz) + T * np.log1p(u) + 2.0 * r * np.log1p(np.sqrt(1.0 + u))
    return float(out) if out.ndim == 0 else out


def saddle_dF(z, r: float, T: float):
    """F'(z) = -r/z + T/(T+z) + r / (T (sqrt(1+z/T) + 1 + z/T))."""
    _check_saddle_domain(z, r, T)
    zz = np.asarray(z, dtype=float)
    u = 1.0 + zz / T
    out = -r / zz + T / (T + zz) + r / (T * (np.sqrt(u) + u))
    return float(out) if out.ndim == 0 else out


def _offset_equation(d, eps, sqrt=math.sqrt):
    # F'(r(1+d)) with the O(1) parts of -r/z + T/(T+z) cancelled analytically
    u = 1 + eps * (1 + d)
    return (d - eps * (1 + d)) / ((1 + d) * u) + eps / (sqrt(u) + u)


def saddle_offset(r: float, T: float, dps: int | None = None):
    """d = z0/r - 1 for the root z0 of F' in [r/2, 2r], by bisection.

    With ``dps`` the bisection runs in mpmath at that many digits and returns
    an mpf; otherwise it runs in floats until the bracket stops shrinking.

    Raises
    ------
    BracketError
        If F' does not change sign on [r/2, 2r].
    """
    if not 0 < r < T:
        raise DomainError(f"saddle_z0 needs 0 < r < T, got r={r}, T={T}")
    if dps is None:
        eps = r / T
        f = lambda d: _offset_equation(d, eps)  # noqa: E731
        lo, hi = -0.5, 1.0
        max_iter = 200
    else:
        ctx = mpmath.workdps(dps)
        ctx.__enter__()
        eps = mpmath.mpf(r) / mpmath.mpf(T)
        f = lambda d: _offset_equation(d, eps, mpmath.sqrt)  # noqa: E731
        lo, hi = mpmath.mpf(-0.5), mpmath.mpf(1)
        max_iter = int(dps * 3.5) + 10
    try:
        flo, fhi = f(lo), f(hi)
        if flo * fhi > 0:
            raise BracketError(f"F' has no sign change on [r/2, 2r] for r={r}, T={T}")
        for _ in range(max_iter):
            mid = (lo + hi) / 2
            if mid == lo or mid == hi:
                break
            fm = f(mid)
            if fm == 0:
                lo = hi = mid
                break
            if (fm < 0) == (flo < 0):
                lo, flo = mid, fm
            else:
                hi = mid
        return (lo + hi) / 2
    finally:
        if dps is not None:
            ctx.__exit__(None, None, None)


def saddle_z0(r: float, T: float, dps: int | None = None):
    """Root z0 of F'(z; r, T) bracketed in [r/2, 2r]."""
    d = saddle_offset(r, T, dps)
    return r * (1 + d)


def saddle_expansion_remainder(r: float, T: float, dps: int = 60) -> float:
    """z0/r - (1 + r/2T + r^2/8T^2), computed at ``dps`` digits."""
    with mpmath.workdps(dps):
        d = saddle_offset(r, T, dps)
        eps = mpmath.mpf(r) / T
        return float(d - (eps / 2 + eps ** 2 / 8))


def saddle_remainder_slope(r: float = 10.0, Ts=(1e4, 1e5, 1e6), dps: int = 60) -> float:
    """Log-log slope of |saddle_expansion_remainder| against r/T."""
    eps = np.array([r / T for T in Ts])
    rem = np.array([abs(saddle_expansion_remainder(r, T, dps)) for T in Ts])
    return float(np.polyfit(np.log(eps), np.log(rem), 1)[0])


def saddle_value_T_derivative(r: float, T: float, rel_step: float = 1e-4, dps: int = 60) -> float:
    """d/dT of F(z0(T); r, T) by a central difference with step T * rel_step."""
    with mpmath.workdps(dps):
        r_m = mpmath.mpf(r)

        def value(TT):
            z = r_m * (1 + saddle_offset(r, TT, dps))
            return -r_m * mpmath.log(z) + TT * mpmath.log1p(z / TT) + 2 * r_m * mpmath.log1p(mpmath.sqrt(1 + z / TT))

        T_m = mpmath.mpf(T)
        h = T_m * rel_step
        return float((value(T_m + h) - value(T_m - h)) / (2 * h))
