"""Fourth power moment of zeta on the critical line, the P4 fit and E2(T).

The engine integrates Z(t)^4 with 16-node Gauss-Legendre panels whose width
follows the local zero spacing 2 pi / log(t / 2 pi). Panel edges start at 0
and do not depend on the requested height, so every quantity derived from
the engine is consistent across runs of different length.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError
from .parallel import chunked_map
from .quadrature import PanelInterpolant, Panels, zero_spacing_width
from .zeta import z_hardy

logger = logging.getLogger(__name__)

A4 = 1.0 / (2.0 * math.pi ** 2)
TAGS = ("pinned", "fitted", "loaded")


@dataclass(frozen=True)
class P4Coefficients:
    """Coefficients a0..a4 of P4 with a provenance tag per coefficient."""

    a: tuple[float, float, float, float, float]
    tags: tuple[str, str, str, str, str] = ("fitted",) * 5
    residual_rms: float | None = None

    def __post_init__(self):
        if len(self.a) != 5 or len(self.tags) != 5:
            raise DomainError("P4Coefficients needs exactly five coefficients and tags")
        if any(t not in TAGS for t in self.tags):
            raise DomainError(f"unknown provenance tag in {self.tags}")
        if self.tags[4] == "pinned" and self.a[4] != A4:
            raise DomainError("a4 tagged pinned must equal 1/(2 pi^2)")

    def p4(self, x):
        return np.polynomial.polynomial.polyval(x, self.a)

    def q4_coefficients(self) -> np.ndarray:
        """Coefficients of Q4 = P4 + P4'."""
        a = np.asarray(self.a, dtype=float)
        d = np.polynomial.polynomial.polyder(a)
        q = a.copy()
        q[: len(d)] += d
        return q

    def q4(self, x):
        return np.polynomial.polynomial.polyval(x, self.q4_coefficients())


def load_coefficients(path: str | Path) -> P4Coefficients:
    """Read a ``j,a_j,tag`` CSV; every coefficient comes back tagged ``loaded``."""
    a = [None] * 5
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["j", "a_j", "tag"]:
            raise DataError(f"{path}: header must be j,a_j,tag, got {reader.fieldnames}")
        for row_no, row in enumerate(reader, start=2):
            try:
                j = int(row["j"])
                a[j] = float(row["a_j"])
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{row_no}: bad coefficient row {row}") from exc
    if any(v is None for v in a):
        raise DataError(f"{path}: coefficients a0..a4 must all be present")
    return P4Coefficients(tuple(a), ("loaded",) * 5)


def write_coefficients(coeffs: P4Coefficients, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "a_j", "tag"])
        for j, (v, tag) in enumerate(zip(coeffs.a, coeffs.tags)):
            w.writerow([j, repr(float(v)), tag])


# --------------------------------------------------------------------------
# fourth-moment engine
# --------------------------------------------------------------------------

class MomentEngine:
    """Z^4 sampled at Gauss-Legendre panel nodes on [0, t_max].

    Holds the running integral M(x) = int_0^x Z^4 for any x <= t_max via
    per-panel Legendre interpolants, so E2 can be read off at arbitrary
    points without further zeta evaluations.
    """

    def __init__(self, t_max: float, workers: int = 1, z_values: np.ndarray | None = None,
                 power: int = 2):
        self.t_max = float(t_max)
        self.power = int(power)
        self.panels = Panels.from_edges(_moment_edges(self.t_max, self.power))
        if z_values is None:
            z_values = chunked_map(z_hardy, self.panels.flat_nodes, workers=workers)
        self.z = np.asarray(z_values, dtype=float).reshape(self.panels.nodes.shape)
        self.fourth = PanelInterpolant(self.panels.edges, self.z ** 4)
        self._powers = {2: self.fourth}

    @property
    def edges(self) -> np.ndarray:
        return self.panels.edges

    def interpolant(self, k: int) -> PanelInterpolant:
        """Panel interpolant of Z^(2k) on this engine's nodes."""
        if k not in self._powers:
            self._powers[k] = PanelInterpolant(self.panels.edges, self.z ** (2 * k))
        return self._powers[k]

    def moment(self, x):
        """int_0^x Z(t)^4 dt."""
        xx = np.asarray(x, dtype=float)
        if np.any(xx < 0) or np.any(xx > self.edges[-1]):
            raise DomainError(f"moment: x outside [0, {self.edges[-1]}]")
        return self.fourth.integral_to(xx)

    def moment_error(self, x: float) -> float:
        return self.fourth.error_to(x)

    def save(self, path: str | Path) -> None:
        np.savez(path, t_max=self.t_max, power=self.power, edges=self.panels.edges, z=self.z)

    @classmethod
    def load(cls, path: str | Path) -> "MomentEngine":
        data = np.load(path)
        power = int(data["power"]) if "power" in data else 2
        eng = cls(float(data["t_max"]), z_values=data["z"].ravel(), power=power)
        if not np.array_equal(eng.panels.edges, data["edges"]):
            raise DataError(f"{path}: panel layout does not match this version")
        return eng


def _moment_edges(t_max: float, power: int = 2) -> np.ndarray:
    # full panels from 0 with the zero-spacing rule; the last one reaches past t_max
    # Z has a logarithmic singularity (from log Gamma) at t = i/2, so panels
    # near the origin are kept short relative to their distance from it
    edges = [0.0]
    e = 0.0
    while e < t_max:
        e = e + min(float(zero_spacing_width(e, power)), 0.25 + 0.25 * e)
        edges.append(e)
    return np.asarray(edges)


_ENGINES: dict[int, MomentEngine] = {}


def default_engine(t_max: float, power: int = 2) -> MomentEngine:
    """Process-wide engine for Z^(2 power) covering at least ``t_max``.

    A smaller engine is replaced by one at least twice its size, so repeated
    growth costs a bounded multiple of the final build.
    """
    eng = _ENGINES.get(power)
    if eng is None or eng.t_max < t_max:
        size = max(t_max, 2.0 * eng.t_max if eng else 0.0, 128.0)
        eng = _ENGINES[power] = MomentEngine(size, power=power)
    return eng


def install_engine(engine: MomentEngine) -> None:
    """Make ``engine`` the process-wide engine for its power (e.g. after loading from disk)."""
    _ENGINES[engine.power] = engine


def fourth_moment(T: float, engine: MomentEngine | None = None) -> tuple[float, float]:
    """int_0^T |zeta(1/2+it)|^4 dt and its estimated quadrature error."""
    if T < 0:
        raise DomainError(f"fourth_moment needs T >= 0, got {T}")
    if T == 0:
        return 0.0, 0.0
    eng = engine or default_engine(T)
    return float(eng.moment(T)), eng.moment_error(T)


# --------------------------------------------------------------------------
# P4 fit and E2
# --------------------------------------------------------------------------

MIN_FIT_POINTS = 50


def fit_p4(T: Sequence[float], moment: Sequence[float] | None = None, *,
           pin_a4: bool = True, engine: MomentEngine | None = None) -> P4Coefficients:
    """Least-squares fit of M(T)/T against powers of log T.

    With ``pin_a4`` the leading coefficient is held at 1/(2 pi^2) and only
    a0..a3 are fitted. Residual RMS (in M(T)/T units) is attached.
    """
    T = np.asarray(T, dtype=float)
    if len(T) < MIN_FIT_POINTS:
        raise DomainError(f"fit_p4 needs at least {MIN_FIT_POINTS} grid points, got {len(T)}")
    if np.any(T <= 1):
        raise DomainError("fit_p4 needs T > 1")
    if moment is None:
        eng = engine or default_engine(float(T.max()))
        moment = eng.moment(T)
    y = np.asarray(moment, dtype=float) / T
    x = np.log(T)
    cols = 4 if pin_a4 else 5
    A = np.vander(x, 5, increasing=True)[:, :cols]
    if pin_a4:
        y = y - A4 * x ** 4
    scale = np.abs(A).max(axis=0)
    sol, _, rank, _ = np.linalg.lstsq(A / scale, y, rcond=None)
    if rank < cols:
        raise DomainError(f"fit_p4: rank deficient design (rank {rank} < {cols})")
    sol = sol / scale
    resid = y - A @ sol
    a = list(sol) + ([A4] if pin_a4 else [])
    tags = ("fitted",) * 4 + (("pinned",) if pin_a4 else ("fitted",))
    return P4Coefficients(tuple(float(v) for v in a), tags, float(np.sqrt(np.mean(resid ** 2))))


def main_term(T, coeffs: P4Coefficients):
    """T P4(log T), with the limit 0 at T = 0."""
    TT = np.asarray(T, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(TT > 0, TT * coeffs.p4(np.log(np.where(TT > 0, TT, 1.0))), 0.0)
    return out if out.ndim else float(out)


def e2(T, coeffs: P4Coefficients, engine: MomentEngine | None = None):
    """E2(T) = int_0^T Z^4 - T P4(log T)."""
    TT = np.asarray(T, dtype=float)
    if np.any(TT <= 0):
        raise DomainError("e2 needs T > 0")
    eng = engine or default_engine(float(TT.max()))
    out = eng.moment(TT) - main_term(TT, coeffs)
    return out if np.ndim(out) else float(out)


def _e2_power_integral(T: float, coeffs: P4Coefficients, power: int,
                       engine: MomentEngine | None) -> float:
    if T <= 0:
        return 0.0
    eng = engine or default_engine(T)
    edges = eng.edges
    k = int(np.searchsorted(edges, T, side="right")) - 1
    full = Panels.from_edges(edges[: k + 1]) if k >= 1 else None
    total = 0.0
    if full is not None:
        total += full.integrate(e2(full.flat_nodes, coeffs, eng) ** power)
    if T > edges[k]:
        part = Panels.from_edges(np.array([edges[k], T]))
        total += part.integrate(e2(part.flat_nodes, coeffs, eng) ** power)
    return total


def e2_mean_square(T: float, coeffs: P4Coefficients, engine: MomentEngine | None = None) -> float:
    """int_0^T E2(t)^2 dt."""
    return _e2_power_integral(T, coeffs, 2, engine)


def e2_running_integral(T: float, coeffs: P4Coefficients, engine: MomentEngine | None = None) -> float:
    """int_0^T E2(t) dt."""
    return _e2_power_integral(T, coeffs, 1, engine)


def e2_running_profile(T: np.ndarray, coeffs: P4Coefficients, power: int,
                       engine: MomentEngine | None = None) -> np.ndarray:
    """int_0^T E2^power on an increasing grid of T, sharing one pass over the panels."""
    T = np.asarray(T, dtype=float)
    eng = engine or default_engine(float(T.max()))
    vals = e2(np.maximum(eng.panels.nodes, 1e-300), coeffs, eng) ** power
    interp = PanelInterpolant(eng.edges, vals)
    return interp.integral_to(T)


def dirichlet_sum(N: int, N1: int, t: float) -> complex:
    """sum_{N < n <= N1} n^(-it)."""
    if not N < N1 <= 2 * N:
        raise DomainError(f"dirichlet_sum needs N < N1 <= 2N, got N={N}, N1={N1}")
    n = np.arange(N + 1, N1 + 1, dtype=float)
    return complex(np.sum(np.exp(-1j * t * np.log(n))))


# --------------------------------------------------------------------------
# tables and statistics
# --------------------------------------------------------------------------

@dataclass
class MomentTable:
    """Rows (T, int_0^T Z^4, E2(T)) for one coefficient set."""

    T: np.ndarray
    fourth_moment: np.ndarray
    E2: np.ndarray
    coeffs: P4Coefficients
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, T: Sequence[float], coeffs: P4Coefficients,
              engine: MomentEngine | None = None) -> "MomentTable":
        T = np.asarray(T, dtype=float)
        if np.any(np.diff(T) <= 0) or np.any(T <= 0):
            raise DomainError("MomentTable grid must be positive and strictly increasing")
        eng = engine or default_engine(float(T.max()))
        M = eng.moment(T)
        table = cls(T, M, M - main_term(T, coeffs), coeffs,
                    {"t_min": float(T[0]), "t_max": float(T[-1]), "points": int(len(T))})
        table.check()
        return table

    def check(self) -> None:
        if np.any(np.diff(self.fourth_moment) <= 0):
            raise DataError("MomentTable: fourth-moment column is not strictly increasing")
        if not np.array_equal(self.E2, self.fourth_moment - main_term(self.T, self.coeffs)):
            raise DataError("MomentTable: E2 column differs from M(T) - T P4(log T)")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["T", "fourth_moment", "E2"])
            for row in zip(self.T, self.fourth_moment, self.E2):
                w.writerow([repr(float(v)) for v in row])


def sign_changes(values: np.ndarray) -> int:
    """Number of strict sign changes in a sequence (zeros skipped)."""
    s = np.sign(np.asarray(values))
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def dyadic_sup(T: np.ndarray, values: np.ndarray, start: float, stop: float) -> tuple[np.ndarray, np.ndarray]:
    """Block maxima of |values| over dyadic blocks [2^k start, 2^(k+1) start) up to ``stop``."""
    lo, his, sups = start, [], []
    while lo * 2 <= stop * (1 + 1e-12):
        m = (T >= lo) & (T < 2 * lo)
        if np.any(m):
            his.append(2 * lo)
            sups.append(float(np.max(np.abs(values[m]))))
        lo *= 2
    return np.asarray(his), np.asarray(sups)

