"""Gauss-Legendre panel quadrature and vertical-line integration helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .numerics import BumpSpec, smooth_bump

NODES = 16
TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=8)
def gl_rule(n: int = NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return legendre.leggauss(n)


@lru_cache(maxsize=8)
def _interp_matrices(n: int = NODES):
    # values at GL nodes -> Legendre coefficients, and coefficients -> antiderivative from -1
    x, w = gl_rule(n)
    V = legendre.legvander(x, n - 1)
    to_coeff = np.linalg.inv(V)
    anti = np.zeros((n + 1, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        anti[:, j] = legendre.legint(e, lbnd=-1.0)
    return to_coeff, anti


def zero_spacing_width(t, power: int = 2, h_max: float = 2.0) -> np.ndarray:
    """Panel width tied to the local zero spacing 2 pi / log(t / 2 pi).

    ``power`` is the exponent k of |zeta|^(2k); Z^(2k) oscillates k/2 times
    faster than Z^4, so widths scale by 2/k.
    """
    tt = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        lg = np.log(np.maximum(tt, 1e-300) / TWO_PI)
    width = TWO_PI / np.maximum(lg, TWO_PI / h_max)
    return width * (2.0 / power)


def panel_edges(lo: float, hi: float, width: Callable[[float], float]) -> np.ndarray:
    """Edges lo = e_0 < e_1 < ... with e_{k+1} = e_k + width(e_k); the last edge is exactly ``hi``."""
    edges = [lo]
    e = lo
    while True:
        e = e + float(width(e))
        if e >= hi:
            break
        edges.append(e)
    if hi - edges[-1] < 1e-9 * max(1.0, abs(hi)):
        edges[-1] = hi
    else:
        edges.append(hi)
    return np.asarray(edges)


@dataclass
class Panels:
    """Composite Gauss-Legendre rule; ``nodes`` and ``weights`` have shape (P, n)."""

    edges: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_edges(cls, edges: np.ndarray, n: int = NODES) -> "Panels":
        x, w = gl_rule(n)
        a, b = edges[:-1, None], edges[1:, None]
        half = 0.5 * (b - a)
        return cls(np.asarray(edges), a + half * (x + 1.0), half * w)

    @property
    def flat_nodes(self) -> np.ndarray:
        return self.nodes.ravel()

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(np.sum(self.weights * values.reshape(self.nodes.shape), axis=1)))


class PanelInterpolant:
    """Per-panel degree n-1 Legendre interpolants of data given at GL nodes.

    Provides the running integral from ``edges[0]`` to any point and a
    per-panel truncation estimate from the two highest coefficients.
    """

    def __init__(self, edges: np.ndarray, values: np.ndarray):
        n = values.shape[1]
        to_coeff, anti = _interp_matrices(n)
        self.edges = edges
        self.half = 0.5 * np.diff(edges)
        self.coeffs = values @ to_coeff.T
        self.anti = self.coeffs @ anti.T
        panel_int = 2.0 * self.half * self.coeffs[:, 0]  # integral of P_0 term over [-1, 1] is 2
        self.cumulative = np.concatenate([[0.0], np.cumsum(panel_int)])
        self.panel_error = 2.0 * self.half * (np.abs(self.coeffs[:, -1]) + np.abs(self.coeffs[:, -2]))

    def _locate(self, x: np.ndarray):
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.half) - 1)
        u = (x - self.edges[idx]) / self.half[idx] - 1.0
        return idx, u

    def integral_to(self, x) -> np.ndarray:
        xx = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xx).ravel()
        idx, u = self._locate(flat)
        partial = legendre.legval(u, self.anti[idx].T, tensor=False)
        out = self.cumulative[idx] + self.half[idx] * partial
        return out.reshape(xx.shape) if xx.ndim else float(out[0])

    def value(self, x) -> np.ndarray:
        xx = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xx).ravel()
        idx, u = self._locate(flat)
        out = legendre.legval(u, self.coeffs[idx].T, tensor=False)
        return out.reshape(xx.shape) if xx.ndim else float(out[0])

    def error_to(self, x):
        """Sum of per-panel truncation estimates up to ``x`` (partial panel counted in full)."""
        xx = np.asarray(x, dtype=float)
        idx, _ = self._locate(np.atleast_1d(xx))
        out = np.cumsum(self.panel_error)[idx]
        return out.reshape(xx.shape) if xx.ndim else float(out[0])


# --------------------------------------------------------------------------
# vertical-line integrals
# --------------------------------------------------------------------------

LINE_STEP = 0.05
TAPER_FRACTION = 0.5


def line_grid(tmax: float, step: float = LINE_STEP) -> np.ndarray:
    """Symmetric uniform grid on [-tmax, tmax] with spacing at most ``step``."""
    n = max(2, int(math.ceil(tmax / step)))
    return np.linspace(-tmax, tmax, 2 * n + 1)


def taper_weights(v: np.ndarray, tmax: float, fraction: float = TAPER_FRACTION) -> np.ndarray:
    """Smooth window equal to 1 on |v| <= (1-fraction) tmax and 0 at |v| = tmax."""
    inner = (1.0 - fraction) * tmax
    bump = smooth_bump(BumpSpec(-tmax, -inner, inner, tmax))
    return bump(v)


def trapezoid_weights(v: np.ndarray) -> np.ndarray:
    h = v[1] - v[0]
    w = np.full(len(v), h)
    w[0] = w[-1] = 0.5 * h
    return w


TAIL_FIT_FRACTION = 0.125


def algebraic_tail(v: np.ndarray, values: np.ndarray) -> complex:
    """Tail beyond both ends for an integrand decaying like C / v^2, i.e. C/|v| per end.

    C is the average of v^2 * values over the outer eighth of each side, so
    an end point that happens to sit on a local peak does not dominate.
    """
    a = np.abs(v)
    vmax = a.max()
    total = 0j
    for side in (v < 0, v > 0):
        m = side & (a >= (1.0 - TAIL_FIT_FRACTION) * vmax)
        C = complex(np.mean(values[m] * v[m] ** 2))
        total += C / vmax
    return total


def line_integral(values: np.ndarray, v: np.ndarray, *, tmax: float,
                  mode: str = "taper") -> tuple[complex, float]:
    """(1/2 pi) * integral of ``values`` over the grid ``v``.

    ``mode="taper"`` multiplies by :func:`taper_weights` (oscillatory
    integrands); ``mode="algebraic"`` adds :func:`algebraic_tail` (integrands
    decaying like v^-2). ``mode="plain"`` is the bare trapezoid sum. The
    second return value is a truncation estimate: the size of the tail
    correction for the algebraic mode, the edge magnitude otherwise.
    """
    w = trapezoid_weights(v)
    if mode == "taper":
        w = w * taper_weights(v, tmax)
    total = complex(np.sum(w * values))
    if mode == "algebraic":
        tail = algebraic_tail(v, values)
        total += tail
        est = abs(tail)
    else:
        est = float((abs(values[0]) + abs(values[-1])) * tmax)
    return total / TWO_PI, est / TWO_PI
