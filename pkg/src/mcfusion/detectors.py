"""Fusion-center decision statistics over Poisson slot-sum counts.

Two reporting schemes are supported.  With per-sensor molecule types (DTM)
the fusion center sees one slot-count matrix per decision and reduces it to
per-sensor slot sums; with a shared molecule type (STM) it sees a single
slot-count vector and reduces it to one total.  All statistics below are
functions of those sums only.

Per-sensor statistics can be exactly +inf or -inf when a sensing mass is
zero (an observation impossible under one hypothesis); `numerics.combine_llrs`
fixes the convention for totals.  Ties at the threshold always resolve to
the normal hypothesis.
"""

from __future__ import annotations

import math

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import ChannelParams
from .numerics import combine_llr_rows, combine_llrs, log_slot_sum_weight, logsumexp
from .sensing import SensingModel, SumSensingPMF

__all__ = [
    "DetectorKind",
    "DetectorSpec",
    "ObservationBatch",
    "llr_opt_dtm_sensor",
    "llr_opt_dtm_total",
    "llr_maxlog_sensor",
    "llr_mrc",
    "llr_cv",
    "llr_stm",
    "cv_estimate",
    "decide",
    "decide_mrc",
    "decide_stm_sum",
    "decide_two_stage",
    "decide_batch",
    "per_sensor_llr",
    "total_llr_rows",
]


class DetectorKind(str, Enum):
    """The six fusion rules, keyed by their CLI/CSV names."""

    OPT_DTM = "opt-dtm"
    OPT_STM = "opt-stm"
    MAX_LOG = "max-log"
    MRC = "mrc"
    CV = "cv"
    TWO_STAGE = "two-stage"


# Kinds whose decision thresholds an integer count; the rest threshold a
# real-valued log-likelihood ratio.
COUNT_KINDS = frozenset({DetectorKind.OPT_STM, DetectorKind.MRC})
LLR_KINDS = frozenset({DetectorKind.OPT_DTM, DetectorKind.MAX_LOG, DetectorKind.CV})


@dataclass(frozen=True)
class DetectorSpec:
    """A detector kind bound to its operating threshold(s).

    ``threshold`` is an integer count for the count-thresholding kinds and a
    real LLR level otherwise.  The two-stage rule instead carries the local
    count threshold and the global vote threshold.
    """

    kind: DetectorKind
    threshold: float | None = None
    gamma_local: int | None = None
    gamma_global: int | None = None

    def __post_init__(self):
        kind = DetectorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is DetectorKind.TWO_STAGE:
            if self.gamma_local is None or self.gamma_global is None:
                raise ValueError("two-stage needs gamma_local and gamma_global")
            if self.threshold is not None:
                raise ValueError("two-stage takes no scalar threshold")
        else:
            if self.threshold is None:
                raise ValueError(f"{kind.value} needs a threshold")
            if self.gamma_local is not None or self.gamma_global is not None:
                raise ValueError(f"{kind.value} takes no two-stage thresholds")
            if kind in COUNT_KINDS and not float(self.threshold).is_integer() \
                    and math.isfinite(self.threshold):
                raise ValueError(f"{kind.value} thresholds an integer count")

    @property
    def scheme(self) -> str:
        return "stm" if self.kind is DetectorKind.OPT_STM else "dtm"


@dataclass(frozen=True)
class ObservationBatch:
    """One decision window of slot counts.

    DTM: ``counts`` has shape (M, N), row m holding sensor m's slot counts.
    STM: ``counts`` has shape (N,), the shared-molecule slot counts.
    """

    scheme: str
    counts: np.ndarray

    def __post_init__(self):
        if self.scheme not in ("dtm", "stm"):
            raise ValueError("scheme must be 'dtm' or 'stm'")
        counts = np.asarray(self.counts)
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("counts must be integers")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        want = 2 if self.scheme == "dtm" else 1
        if counts.ndim != want:
            raise ValueError(f"{self.scheme} counts must be {want}-D")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @classmethod
    def dtm(cls, counts) -> "ObservationBatch":
        return cls(scheme="dtm", counts=np.asarray(counts))

    @classmethod
    def stm(cls, counts) -> "ObservationBatch":
        return cls(scheme="stm", counts=np.asarray(counts))

    @property
    def per_sensor_sums(self) -> np.ndarray:
        """Slot sums per sensor (DTM); for STM a length-1 array of the total."""
        if self.scheme == "dtm":
            return self.counts.sum(axis=1)
        return self.counts.sum(keepdims=True)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _llr_from_log_terms(t1: np.ndarray, t0: np.ndarray) -> np.ndarray:
    """Numerator/denominator log-sums to an LLR with sentinel conventions.

    Empty (all -inf) sums mark an observation impossible under that
    hypothesis: impossible under both resolves to 0, under exactly one to
    the matching infinite sentinel.
    """
    num = logsumexp(t1, axis=0)
    den = logsumexp(t0, axis=0)
    return _safe_diff(np.asarray(num), np.asarray(den))


def _safe_diff(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    both = np.isneginf(num) & np.isneginf(den)
    with np.errstate(invalid="ignore"):
        out = np.where(both, 0.0, num - den)
    return out


def _scalar_or_array(out: np.ndarray, scalar_in: bool):
    return float(out.reshape(())) if scalar_in else out


def _mixture_log_terms(log_g: np.ndarray, means: np.ndarray, sig: np.ndarray,
                       n_slots: int) -> np.ndarray:
    # Rows: grid components; columns: requested slot sums.
    return log_g[:, None] + log_slot_sum_weight(means[:, None], sig[None, :], n_slots)


def _log_masses(g: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(g)


def llr_opt_dtm_sensor(sigma, model: SensingModel, params: ChannelParams):
    """Optimal per-sensor LLR of a slot-sum count (per-sensor molecule types).

    Mixes the Poisson slot-sum likelihood over the sensing grid under each
    hypothesis and returns the log ratio:

        log sum_x g1(x) w(x, sigma)  -  log sum_x g0(x) w(x, sigma),

    with w(x, sigma) = exp(-N(xA+J)) (xA+J)^sigma evaluated in the log
    domain.  Accepts a scalar or an array of sums; stays finite for sums and
    means into the 1e6 / 1e3 range.
    """
    sig = np.atleast_1d(np.asarray(sigma, dtype=float))
    _check_sigma(sig)
    means = model.grid * params.A + params.J
    t1 = _mixture_log_terms(_log_masses(model.g1), means, sig, params.N)
    t0 = _mixture_log_terms(_log_masses(model.g0), means, sig, params.N)
    out = _llr_from_log_terms(t1, t0)
    return _scalar_or_array(out, np.isscalar(sigma) or np.ndim(sigma) == 0)


def llr_opt_dtm_total(batch: ObservationBatch, model: SensingModel,
                      params: ChannelParams) -> float:
    """Fusion statistic: sum of optimal per-sensor LLRs over the batch."""
    if batch.scheme != "dtm":
        raise ValueError("expected a DTM batch")
    return combine_llrs(llr_opt_dtm_sensor(batch.per_sensor_sums, model, params))


def llr_maxlog_sensor(sigma, model: SensingModel, params: ChannelParams):
    """Max-log surrogate: each mixture log-sum replaced by its largest term.

    Piecewise-linear in sigma and never further than log(L) from the optimal
    per-sensor statistic.
    """
    sig = np.atleast_1d(np.asarray(sigma, dtype=float))
    _check_sigma(sig)
    means = model.grid * params.A + params.J
    t1 = _mixture_log_terms(_log_masses(model.g1), means, sig, params.N)
    t0 = _mixture_log_terms(_log_masses(model.g0), means, sig, params.N)
    out = _safe_diff(t1.max(axis=0), t0.max(axis=0))
    return _scalar_or_array(out, np.isscalar(sigma) or np.ndim(sigma) == 0)


def llr_mrc(sigma, params: ChannelParams):
    """Ideal-sensor (maximum-ratio-combining) statistic: affine in the count.

    Equals -N*A + sigma * log(1 + A/J); thresholding the summed statistic is
    equivalent to thresholding the summed counts, which is how the decision
    is actually carried out.
    """
    if params.J <= 0.0:
        raise ValueError("the affine count statistic needs J > 0")
    sig = np.asarray(sigma, dtype=float)
    _check_sigma(np.atleast_1d(sig))
    out = sig * math.log1p(params.A / params.J) - params.N * params.A
    return _scalar_or_array(np.asarray(out), np.isscalar(sigma) or np.ndim(sigma) == 0)


def _cv_indices(sig: np.ndarray, params: ChannelParams, grid: np.ndarray) -> np.ndarray:
    means = np.asarray(grid, dtype=float) * params.A + params.J
    obj = log_slot_sum_weight(means[:, None], sig[None, :], params.N)
    return np.argmax(obj, axis=0)  # first maximum -> smallest grid value


def cv_estimate(sigma, params: ChannelParams, grid):
    """Most-likely sensed value for a slot-sum count, ties to the smaller x.

    Maximizes the Poisson slot-sum log-likelihood -N(xA+J) + sigma*log(xA+J)
    over the grid; the prior masses are deliberately ignored.
    """
    sig = np.atleast_1d(np.asarray(sigma, dtype=float))
    _check_sigma(sig)
    grid = np.asarray(grid, dtype=float)
    out = grid[_cv_indices(sig, params, grid)]
    return _scalar_or_array(out, np.isscalar(sigma) or np.ndim(sigma) == 0)


def llr_cv(sigma, model: SensingModel, params: ChannelParams):
    """Plug-in statistic log g1(xhat)/g0(xhat) at the most-likely sensed value.

    Zero masses produce the +-inf sentinels: +inf when the estimate is
    impossible under the normal hypothesis, -inf when impossible under the
    abnormal one.
    """
    sig = np.atleast_1d(np.asarray(sigma, dtype=float))
    _check_sigma(sig)
    scalar_in = np.isscalar(sigma) or np.ndim(sigma) == 0
    idx = _cv_indices(sig, params, model.grid)
    out = _safe_diff(_log_masses(model.g1)[idx], _log_masses(model.g0)[idx])
    return _scalar_or_array(out, scalar_in)


def llr_stm(sigma_total, spmf: SumSensingPMF, params: ChannelParams):
    """Optimal LLR of the total count when sensors share one molecule type.

    Same mixture form as the per-sensor DTM statistic, but over the sum grid
    {l/(L-1) : l = 0..M(L-1)} with the M-fold convolved masses, and with the
    noise mean J entering once.
    """
    if spmf.M != params.M:
        raise ValueError("sum PMF and channel params disagree on M")
    sig = np.atleast_1d(np.asarray(sigma_total, dtype=float))
    _check_sigma(sig)
    means = spmf.grid * params.A + params.J
    t1 = _mixture_log_terms(_log_masses(spmf.G1), means, sig, params.N)
    t0 = _mixture_log_terms(_log_masses(spmf.G0), means, sig, params.N)
    out = _llr_from_log_terms(t1, t0)
    return _scalar_or_array(out, np.isscalar(sigma_total) or np.ndim(sigma_total) == 0)


def decide(statistic: float, gamma: float) -> int:
    """1 (abnormal) iff the statistic strictly exceeds the threshold.

    Ties go to the normal hypothesis; the +-inf sentinels order above/below
    every real threshold.
    """
    return int(statistic > gamma)


def decide_mrc(batch: ObservationBatch, gamma_mrc: float) -> int:
    """Count-domain ideal-sensor rule: total count over all sensors/slots."""
    if batch.scheme != "dtm":
        raise ValueError("expected a DTM batch")
    return decide(batch.total, gamma_mrc)


def decide_stm_sum(batch: ObservationBatch, gamma_stm: float) -> int:
    """Count-domain shared-molecule rule, equivalent to thresholding llr_stm."""
    if batch.scheme != "stm":
        raise ValueError("expected an STM batch")
    return decide(batch.total, gamma_stm)


def decide_two_stage(batch: ObservationBatch, gamma_local: float,
                     gamma_global: float) -> int:
    """Local count votes fused by a global vote count.

    Sensor m votes 1 iff its slot sum exceeds gamma_local; the fusion center
    decides abnormal iff the number of votes exceeds gamma_global.
    """
    if batch.scheme != "dtm":
        raise ValueError("expected a DTM batch")
    votes = int((batch.per_sensor_sums > gamma_local).sum())
    return decide(votes, gamma_global)


def per_sensor_llr(kind: DetectorKind, model: SensingModel, params: ChannelParams):
    """Vectorized slot-sum -> statistic map for the per-sensor-statistic kinds."""
    kind = DetectorKind(kind)
    if kind is DetectorKind.OPT_DTM:
        return lambda sig: llr_opt_dtm_sensor(sig, model, params)
    if kind is DetectorKind.MAX_LOG:
        return lambda sig: llr_maxlog_sensor(sig, model, params)
    if kind is DetectorKind.CV:
        return lambda sig: llr_cv(sig, model, params)
    if kind is DetectorKind.MRC:
        return lambda sig: llr_mrc(sig, params)
    raise ValueError(f"{kind.value} has no per-sensor statistic")


def decide_batch(spec: DetectorSpec, batch: ObservationBatch, model: SensingModel,
                 params: ChannelParams, spmf: SumSensingPMF | None = None) -> int:
    """Apply any configured detector to one observation batch."""
    kind = spec.kind
    if kind is DetectorKind.MRC:
        return decide_mrc(batch, spec.threshold)
    if kind is DetectorKind.OPT_STM:
        return decide_stm_sum(batch, spec.threshold)
    if kind is DetectorKind.TWO_STAGE:
        return decide_two_stage(batch, spec.gamma_local, spec.gamma_global)
    if kind is DetectorKind.OPT_DTM:
        return decide(llr_opt_dtm_total(batch, model, params), spec.threshold)
    if batch.scheme != "dtm":
        raise ValueError("expected a DTM batch")
    stat_fn = per_sensor_llr(kind, model, params)
    total = combine_llrs(stat_fn(batch.per_sensor_sums))
    return decide(total, spec.threshold)


def total_llr_rows(kind: DetectorKind, sums: np.ndarray, model: SensingModel,
                   params: ChannelParams) -> np.ndarray:
    """Fusion statistics for many DTM trials at once; ``sums`` is (n, M)."""
    stat_fn = per_sensor_llr(kind, model, params)
    flat = stat_fn(sums.reshape(-1).astype(float))
    return combine_llr_rows(np.asarray(flat).reshape(sums.shape))


def _check_sigma(sig: np.ndarray) -> None:
    if np.any(sig < 0) or np.any(sig != np.floor(sig)):
        raise ValueError("slot sums must be nonnegative integers")
