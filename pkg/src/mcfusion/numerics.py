"""Log-domain primitives shared by the statistic and bound evaluators.

Slot-sum counts can reach 1e6 and per-slot means 1e3+, so every likelihood
quantity is handled as a logarithm and combined with max-shifted sums.  The
helpers here also pin down the conventions for degenerate inputs (zero means,
zero masses) so that every caller resolves them identically.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["logsumexp", "log_slot_sum_weight", "combine_llrs", "combine_llr_rows"]


def logsumexp(a, axis=None):
    """log(sum(exp(a))), max-shifted; tolerates -inf entries.

    An all ``-inf`` slice yields ``-inf`` (an empty sum), never NaN.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise ValueError("logsumexp of an empty array")
    m = np.max(a, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - shift), axis=axis, keepdims=True)) + shift
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def log_slot_sum_weight(means, sigmas, n_slots):
    """log of exp(-N*mean) * mean**sigma, broadcasting means against sigmas.

    This is the per-slot-sum Poisson likelihood with the sigma! term dropped
    (it cancels in every likelihood ratio).  A zero mean is a point mass at
    zero counts: weight 1 for sigma == 0 and weight 0 (log -> -inf) otherwise.
    """
    means = np.asarray(means, dtype=float)
    sig = np.asarray(sigmas, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = sig * np.log(means) - n_slots * means
    # 0 * log(0) shows up as NaN; the zero-mean point mass makes it 0.
    if np.any(means == 0.0):
        out = np.where((means == 0.0) & (sig == 0.0), 0.0, out)
    return out


def combine_llrs(values) -> float:
    """Total log-likelihood ratio from per-sensor terms, sentinel-aware.

    A +inf term marks an observation impossible under the null, a -inf term
    one impossible under the alternative.  Mixing both means the surrogate
    likelihoods vanish on both sides, so the ratio carries no evidence and
    the total resolves to 0.  Plain sums apply when everything is finite.
    """
    v = np.asarray(values, dtype=float)
    pos = bool(np.isposinf(v).any())
    neg = bool(np.isneginf(v).any())
    if pos and neg:
        return 0.0
    if pos:
        return math.inf
    if neg:
        return -math.inf
    return float(v.sum())


def combine_llr_rows(values) -> np.ndarray:
    """Row-wise :func:`combine_llrs` for an (n, M) array of per-sensor terms."""
    v = np.asarray(values, dtype=float)
    pos = np.isposinf(v).any(axis=1)
    neg = np.isneginf(v).any(axis=1)
    out = np.where(np.isfinite(v), v, 0.0).sum(axis=1)
    out = np.where(pos, np.inf, out)
    out = np.where(neg, -np.inf, out)
    out = np.where(pos & neg, 0.0, out)
    return out
