"""Chernoff exponents and finite-M upper bounds on the error probabilities.

For a per-sensor statistic lam(w) of the slot-sum count w with PMF f_i
under hypothesis i, the tilted log-MGF sum

    K_i(s) = log sum_w exp(s * lam(w)) * f_i(w)

gives the exponent Ex_i(s) = -K_i(s) and, for a fused threshold gamma over
M sensors, the bounds

    Pfa <= exp(-M * Ex_0(s) - s * gamma)   for s > 0,
    Pm  <= exp(-M * Ex_1(s) - s * gamma)   for s < 0,

each clamped at 1.  The optimal tilt on either side is located by a coarse
grid followed by golden-section refinement; the stationarity shortcut is
deliberately not used, only direct one-dimensional minimization.
"""

from __future__ import annotations

import math

from dataclasses import dataclass

import numpy as np

from .analysis import CountPMF
from .numerics import logsumexp

__all__ = [
    "ExponentCurve",
    "OptimalTilt",
    "chernoff_exponent",
    "chernoff_bounds",
    "optimize_s",
    "exponent_curve",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _log_mgf(s: float, pmf: CountPMF, llr_values: np.ndarray) -> float:
    mask = pmf.mass > 0.0
    lam = llr_values[mask]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = s * lam + np.log(pmf.mass[mask])
    # s * lam is NaN only for s == 0 with lam infinite: exp(0 * lam) == 1.
    terms = np.where(np.isnan(terms), np.log(pmf.mass[mask]), terms)
    if np.isposinf(terms).any():
        raise ValueError("tilted sum diverges: infinite statistic amplified by s")
    return logsumexp(terms)


def _statistic_values(llr, pmf: CountPMF) -> np.ndarray:
    vals = np.asarray(llr if isinstance(llr, np.ndarray) else
                      llr(pmf.support), dtype=float)
    if vals.shape != pmf.mass.shape:
        raise ValueError("statistic values must align with the PMF support")
    return vals


def chernoff_exponent(s: float, pmf: CountPMF, llr) -> float:
    """Exponent -log sum_w exp(s*lam(w)) f(w) of one tilted per-sensor sum.

    ``llr`` maps the PMF support to statistic values (callable or array).
    Raises when the tilt amplifies an infinite statistic carrying mass.
    """
    return -_log_mgf(s, pmf, _statistic_values(llr, pmf))


def chernoff_bounds(s0: float, s1: float, gamma: float, m_sensors: int,
                    pmf0: CountPMF, pmf1: CountPMF, llr) -> tuple[float, float]:
    """(Pfa upper bound, Pm upper bound) at tilts s0 > 0 and s1 < 0."""
    if s0 <= 0.0 or s1 >= 0.0:
        raise ValueError("need s0 > 0 and s1 < 0")
    vals0 = _statistic_values(llr, pmf0)
    vals1 = _statistic_values(llr, pmf1)
    log_pfa = m_sensors * _log_mgf(s0, pmf0, vals0) - s0 * gamma
    log_pm = m_sensors * _log_mgf(s1, pmf1, vals1) - s1 * gamma
    return min(1.0, math.exp(min(log_pfa, 0.0))), min(1.0, math.exp(min(log_pm, 0.0)))


@dataclass(frozen=True)
class OptimalTilt:
    """Optimal tilts for the two bounds, with boundary flags.

    ``s0_at_boundary`` / ``s1_at_boundary`` report that the coarse-grid
    minimum sat on the edge of the searched interval, i.e. no interior
    optimum was bracketed.
    """

    s0: float
    s1: float
    s0_at_boundary: bool
    s1_at_boundary: bool


def _golden_min(fn, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _minimize_log_bound(log_bound, s_lo: float, s_hi: float,
                        tol: float) -> tuple[float, bool]:
    grid = np.linspace(s_lo, s_hi, 201)
    vals = np.array([log_bound(s) for s in grid])
    k = int(np.argmin(vals))
    # The objective is convex (a log-MGF minus a linear term), so refining
    # inside the cell around the coarse argmin finds the global minimum even
    # when that argmin sits on an edge of the searched interval.
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    s = _golden_min(log_bound, lo, hi, tol)
    at_boundary = s - s_lo <= 2.0 * tol or s_hi - s <= 2.0 * tol
    return float(s), at_boundary


def optimize_s(pmf0: CountPMF, pmf1: CountPMF, llr, gamma: float,
               m_sensors: int, s_max: float = 60.0, tol: float = 1e-4) -> OptimalTilt:
    """Tilts minimizing the two bounds over (0, s_max] and [-s_max, 0).

    Coarse 201-point grid to bracket, then golden-section to |ds| < tol;
    divergent tilts are treated as infinitely bad.
    """
    if s_max <= 0.0:
        raise ValueError("s_max must be positive")
    vals0 = _statistic_values(llr, pmf0)
    vals1 = _statistic_values(llr, pmf1)

    def log_pfa_bound(s):
        try:
            return m_sensors * _log_mgf(s, pmf0, vals0) - s * gamma
        except ValueError:
            return math.inf

    def log_pm_bound(s):
        try:
            return m_sensors * _log_mgf(s, pmf1, vals1) - s * gamma
        except ValueError:
            return math.inf

    eps = s_max * 1e-6
    s0, b0 = _minimize_log_bound(log_pfa_bound, eps, s_max, tol)
    s1, b1 = _minimize_log_bound(log_pm_bound, -s_max, -eps, tol)
    return OptimalTilt(s0=s0, s1=s1, s0_at_boundary=b0, s1_at_boundary=b1)


@dataclass(frozen=True)
class ExponentCurve:
    """Both exponents sampled over a tilt grid, with the grid-located peaks.

    ``ex0`` pairs with positive tilts (false-alarm side), ``ex1`` with the
    mirrored negative tilts (miss side); entries are NaN where the tilted
    sum diverges.
    """

    s_grid: np.ndarray
    ex0: np.ndarray
    ex1: np.ndarray
    s_star0: float
    s_star1: float

    @property
    def peak_ex0(self) -> float:
        return float(np.nanmax(self.ex0))

    @property
    def peak_ex1(self) -> float:
        return float(np.nanmax(self.ex1))


def exponent_curve(pmf0: CountPMF, pmf1: CountPMF, llr,
                   s_grid=None) -> ExponentCurve:
    """Sample Ex_0(s) and Ex_1(-s) over s > 0 and locate their peaks.

    The peaks are the gamma = 0 optimal tilts: the exponents of the two
    bounds when the fused threshold sits at zero.
    """
    if s_grid is None:
        s_grid = np.linspace(0.01, 3.0, 300)
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0.0):
        raise ValueError("the tilt grid must be positive (ex1 uses -s)")
    vals0 = _statistic_values(llr, pmf0)
    vals1 = _statistic_values(llr, pmf1)

    def ex(s, pmf, vals):
        try:
            return -_log_mgf(s, pmf, vals)
        except ValueError:
            return math.nan

    ex0 = np.array([ex(s, pmf0, vals0) for s in s_grid])
    ex1 = np.array([ex(-s, pmf1, vals1) for s in s_grid])
    tilt = optimize_s(pmf0, pmf1, llr, gamma=0.0, m_sensors=1,
                      s_max=float(s_grid[-1]))
    return ExponentCurve(s_grid=s_grid, ex0=ex0, ex1=ex1,
                         s_star0=tilt.s0, s_star1=tilt.s1)
