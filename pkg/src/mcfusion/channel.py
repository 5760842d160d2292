"""Diffusive reporting channel: hitting probabilities and Poisson slot means.

A sensor releases molecules at the start of each slot; a fraction of each
release reaches the absorbing receiver k slots later with probability h_k.
Received counts in a slot are Poisson with mean J + x * A in steady state,
where J is the interfering/noise mean, x the sensed value scaling the
release, and A the aggregate gain Amax * sum(h).
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, erfcinv

__all__ = [
    "DiffusionGeometry",
    "ChannelParams",
    "hitting_probabilities",
    "default_k_max",
    "steady_mean",
    "transient_means",
]


@dataclass(frozen=True)
class DiffusionGeometry:
    """Point-release / absorbing-sphere geometry of one reporting link.

    r1 is the distance from the release point to the receiver center, r2 the
    receiver radius (r1 >= r2: the release point is outside the receiver),
    D the diffusion coefficient and T the slot duration.  k_max is the last
    slot index carrying channel memory.
    """

    r1: float
    r2: float
    D: float
    T: float
    k_max: int

    def __post_init__(self):
        if not (self.r1 >= self.r2 > 0.0):
            raise ValueError("need r1 >= r2 > 0")
        if self.D <= 0.0 or self.T <= 0.0:
            raise ValueError("D and T must be positive")
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")


def _partial_hit_cdf(geom: DiffusionGeometry, slots) -> np.ndarray:
    """P(hit within the first ``slots`` slots) for each entry of ``slots``."""
    slots = np.asarray(slots, dtype=float)
    out = np.zeros_like(slots)
    pos = slots > 0
    arg = (geom.r1 - geom.r2) / np.sqrt(4.0 * geom.D * geom.T * slots[pos])
    out[pos] = (geom.r2 / geom.r1) * erfc(arg)
    return out


def hitting_probabilities(geom: DiffusionGeometry) -> np.ndarray:
    """Per-slot first-arrival masses h_0..h_k_max of one released molecule.

    Entry k is the probability that a molecule released at the start of a
    slot is absorbed during the k-th slot after release.  The partial sums
    telescope to (r2/r1) * erfc((r1-r2)/sqrt(4*D*(k+1)*T)).
    """
    cdf = _partial_hit_cdf(geom, np.arange(geom.k_max + 2))
    h = np.diff(cdf)
    # erfc is monotone here, but guard the k -> k+1 cancellation against
    # negative roundoff dust.
    return np.maximum(h, 0.0)


def default_k_max(r1: float, r2: float, D: float, T: float,
                  rel_tol: float = 1e-6, cap: int = 10_000) -> int:
    """Smallest memory length whose residual arrival mass is negligible.

    Picks the smallest k such that the arrivals beyond slot k carry less
    than ``rel_tol`` of the total (infinite-horizon) arrival mass, capped at
    ``cap`` slots.
    """
    if not (r1 >= r2 > 0.0) or D <= 0.0 or T <= 0.0:
        raise ValueError("need r1 >= r2 > 0 and positive D, T")
    if r1 == r2:
        return 0
    # Residual fraction after k slots is 1 - erfc(a / sqrt(k+1)) with
    # a = (r1-r2)/sqrt(4*D*T); invert erfc directly.
    c = erfcinv(1.0 - rel_tol)
    a = (r1 - r2) / math.sqrt(4.0 * D * T)
    k = math.ceil((a / c) ** 2 - 1.0)
    return int(min(max(k, 0), cap))


@dataclass(frozen=True)
class ChannelParams:
    """Reporting-channel operating point shared by all fusion machinery.

    h:    per-slot hitting probabilities (channel impulse response)
    Amax: molecules per release
    J:    noise/interference mean per slot, per molecule type
    N:    number of reporting slots fused per decision
    M:    number of cooperating sensors
    A:    aggregate gain Amax * sum(h); stored for direct construction and
          validated against h.
    """

    h: np.ndarray
    Amax: float
    J: float
    N: int
    M: int
    A: float

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("h must be a non-empty 1-D array")
        if np.any(h < 0.0) or np.any(h > 1.0):
            raise ValueError("hitting probabilities must lie in [0, 1]")
        if h.sum() > 1.0 + 1e-12:
            raise ValueError("hitting probabilities must sum to at most 1")
        if self.Amax < 0.0 or self.J < 0.0:
            raise ValueError("Amax and J must be nonnegative")
        if self.N < 1 or self.M < 0:
            raise ValueError("need N >= 1 slots and M >= 0 sensors")
        expected = self.Amax * float(h.sum())
        if abs(self.A - expected) > 1e-9 * max(abs(expected), 1.0):
            raise ValueError(
                f"A must equal Amax * sum(h) (got {self.A!r}, expected {expected!r})"
            )
        h.flags.writeable = False
        object.__setattr__(self, "h", h)

    @classmethod
    def from_gain(cls, A: float, J: float, N: int, M: int) -> "ChannelParams":
        """Memoryless operating point with the aggregate gain given directly."""
        if A < 0.0:
            raise ValueError("A must be nonnegative")
        if A == 0.0:
            return cls(h=np.array([0.0]), Amax=1.0, J=J, N=N, M=M, A=0.0)
        return cls(h=np.array([1.0]), Amax=A, J=J, N=N, M=M, A=A)

    @classmethod
    def from_geometry(cls, geom: DiffusionGeometry, Amax: float, J: float,
                      N: int, M: int) -> "ChannelParams":
        h = hitting_probabilities(geom)
        return cls(h=h, Amax=Amax, J=J, N=N, M=M, A=Amax * float(h.sum()))

    @property
    def k_max(self) -> int:
        return self.h.size - 1

    @property
    def snr(self) -> float:
        return math.inf if self.J == 0.0 else self.A / self.J


def _check_sensed(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("sensed values must lie in [0, 1]")
    return x


def steady_mean(x, params: ChannelParams):
    """Per-slot Poisson mean once all memory taps contribute: x * A + J."""
    x = _check_sensed(x)
    out = x * params.A + params.J
    return float(out) if out.ndim == 0 else out


def transient_means(x: float, params: ChannelParams) -> np.ndarray:
    """Per-slot Poisson means during channel fill-in, slots 1..N.

    Slot n (1-indexed) collects arrivals from the releases in slots 1..n, so
    its mean is J + x * Amax * sum(h_0..h_{min(n-1, k_max)}); once n exceeds
    the channel memory the mean saturates at the steady-state value.
    """
    x = float(_check_sensed(x))
    csum = np.cumsum(params.h)
    taps = np.minimum(np.arange(params.N), params.k_max)
    return params.J + x * params.Amax * csum[taps]
