"""Sensor-side decision distributions on the unit quantization grid.

Each sensor quantizes its sensed value onto the grid {l/(L-1) : l = 0..L-1}
and reports it over the molecular channel.  The normal and abnormal
hypotheses induce a pair of PMFs over that grid; everything downstream
(fusion statistics, exact performance, sampling) is driven by this pair.
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass, field

__all__ = [
    "SensingModel",
    "HardSensingModel",
    "SumSensingPMF",
    "make_soft_model",
    "hard_from_soft",
    "sample_sensing",
    "sum_pmf",
]

# Mass functions must sum to 1 within these tolerances; the looser one covers
# the roundoff accumulated by repeated self-convolution.
PMF_TOL = 1e-12
SUM_PMF_TOL = 1e-10


def _validated_pmf(values, name: str, tol: float = PMF_TOL) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D mass function")
    if np.any(arr < 0.0):
        raise ValueError(f"{name} contains negative mass")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 within {tol} (got {total!r})")
    arr.flags.writeable = False
    return arr


def _mlr_holds(q0: np.ndarray, q1: np.ndarray) -> bool:
    # Cross-multiplied ratio test q1(x)*q0(x') >= q0(x)*q1(x') for x > x',
    # so zero masses need no special casing.
    n = q0.size
    for j in range(1, n):
        for i in range(j):
            if q1[j] * q0[i] < q0[j] * q1[i] - 1e-15:
                return False
    return True


@dataclass(frozen=True)
class SensingModel:
    """Pair of sensed-value PMFs (normal vs abnormal) on an L-level grid.

    ``g0`` is the PMF under the normal hypothesis and is typically
    concentrated near 0; ``g1`` is the abnormal PMF, concentrated near 1.
    Neither shape is enforced, only that both are valid PMFs on one grid.
    """

    g0: np.ndarray
    g1: np.ndarray
    L: int = field(init=False)
    grid: np.ndarray = field(init=False)

    def __post_init__(self):
        g0 = _validated_pmf(self.g0, "g0")
        g1 = _validated_pmf(self.g1, "g1")
        if g0.size != g1.size:
            raise ValueError("g0 and g1 must share one support grid")
        if g0.size < 2:
            raise ValueError("need at least two quantization levels")
        grid = np.arange(g0.size) / (g0.size - 1)
        grid.flags.writeable = False
        object.__setattr__(self, "g0", g0)
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "L", int(g0.size))
        object.__setattr__(self, "grid", grid)

    @classmethod
    def from_hard(cls, p0: float, p1: float) -> "SensingModel":
        """Two-level model of a hard-deciding sensor with error pair (p0, p1)."""
        return HardSensingModel(p0, p1).to_model()

    def pmf(self, hypothesis: int) -> np.ndarray:
        if hypothesis not in (0, 1):
            raise ValueError("hypothesis must be 0 or 1")
        return self.g1 if hypothesis else self.g0

    def has_monotone_likelihood_ratio(self) -> bool:
        """True when g1(x)/g0(x) is nondecreasing along the grid.

        This is the condition under which the optimal per-sensor statistic is
        monotone in the slot-sum count.
        """
        return _mlr_holds(self.g0, self.g1)


@dataclass(frozen=True)
class HardSensingModel:
    """Error rates of a hard-deciding (binary) sensor.

    ``p0`` is the false-alarm rate of one sensor (deciding 1 under the normal
    hypothesis) and ``p1`` its miss rate.  ``p0 + p1 <= 1`` is required: a
    sensor worse than a coin flip has a decreasing likelihood ratio and none
    of the fusion statistics here are meant for it.
    """

    p0: float
    p1: float

    def __post_init__(self):
        for name in ("p0", "p1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1] (got {v!r})")
        if self.p0 + self.p1 > 1.0 + 1e-12:
            raise ValueError("p0 + p1 must not exceed 1")

    def to_model(self) -> SensingModel:
        return SensingModel(
            g0=np.array([1.0 - self.p0, self.p0]),
            g1=np.array([self.p1, 1.0 - self.p1]),
        )


@dataclass(frozen=True)
class SumSensingPMF:
    """Distribution of the sum of M i.i.d. sensed values.

    The support is {l/(L-1) : l = 0..M*(L-1)}; ``G0``/``G1`` are the M-fold
    self-convolutions of the per-sensor PMFs, indexed the same way.
    """

    G0: np.ndarray
    G1: np.ndarray
    M: int
    L: int
    grid: np.ndarray = field(init=False)

    def __post_init__(self):
        G0 = _validated_pmf(self.G0, "G0", tol=SUM_PMF_TOL)
        G1 = _validated_pmf(self.G1, "G1", tol=SUM_PMF_TOL)
        if G0.size != G1.size:
            raise ValueError("G0 and G1 must share one support grid")
        if self.M < 1 or self.L < 2:
            raise ValueError("need M >= 1 sensors and L >= 2 levels")
        if G0.size != self.M * (self.L - 1) + 1:
            raise ValueError("support size must be M*(L-1) + 1")
        grid = np.arange(G0.size) / (self.L - 1)
        grid.flags.writeable = False
        object.__setattr__(self, "G0", G0)
        object.__setattr__(self, "G1", G1)
        object.__setattr__(self, "grid", grid)

    def pmf(self, hypothesis: int) -> np.ndarray:
        if hypothesis not in (0, 1):
            raise ValueError("hypothesis must be 0 or 1")
        return self.G1 if hypothesis else self.G0

    def has_monotone_likelihood_ratio(self) -> bool:
        """True when G1(x)/G0(x) is nondecreasing along the sum grid."""
        return _mlr_holds(self.G0, self.G1)


def make_soft_model(L: int, b0: float, b1: float) -> SensingModel:
    """Exponential-family soft model: g_i(x) proportional to exp(b_i * x).

    A negative shape parameter concentrates mass near 0, a positive one near
    1; b0 = b1 gives identical hypotheses.
    """
    if L < 2:
        raise ValueError("need at least two quantization levels")
    grid = np.arange(L) / (L - 1)

    def pmf(b):
        w = np.exp(b * grid - np.max(b * grid))
        return w / w.sum()

    return SensingModel(g0=pmf(b0), g1=pmf(b1))


def hard_from_soft(model: SensingModel) -> HardSensingModel:
    """Collapse a soft model to the error pair of a threshold-at-1/2 sensor.

    Mass above 1/2 counts toward deciding "abnormal", mass below toward
    "normal", and a grid point exactly at 1/2 splits evenly.
    """
    at = model.grid == 0.5
    p0 = 0.5 * float(model.g0[at].sum()) + float(model.g0[model.grid > 0.5].sum())
    p1 = 0.5 * float(model.g1[at].sum()) + float(model.g1[model.grid < 0.5].sum())
    return HardSensingModel(p0=p0, p1=p1)


def sample_sensing(model: SensingModel, hypothesis: int, m_sensors: int, rng) -> np.ndarray:
    """Draw i.i.d. sensed values for ``m_sensors`` sensors under a hypothesis.

    Inverse-CDF sampling on the quantization grid; ``m_sensors = 0`` yields
    an empty vector.
    """
    if m_sensors < 0:
        raise ValueError("m_sensors must be nonnegative")
    if m_sensors == 0:
        return np.empty(0, dtype=float)
    cdf = np.cumsum(model.pmf(hypothesis))
    idx = np.searchsorted(cdf, rng.random(m_sensors), side="right")
    return model.grid[np.minimum(idx, model.L - 1)]


def sum_pmf(model: SensingModel, m_sensors: int) -> SumSensingPMF:
    """Exact M-fold self-convolution of the per-sensor PMFs."""
    if m_sensors < 1:
        raise ValueError("m_sensors must be at least 1")
    G0 = model.g0.copy()
    G1 = model.g1.copy()
    for _ in range(m_sensors - 1):
        G0 = np.convolve(G0, model.g0)
        G1 = np.convolve(G1, model.g1)
    # Repeated convolution drifts at the 1e-16 scale; renormalize the total
    # without disturbing relative masses.
    G0 /= G0.sum()
    G1 /= G1.sum()
    return SumSensingPMF(G0=G0, G1=G1, M=m_sensors, L=model.L)
