"""Seeded Monte Carlo estimation of detector error probabilities.

Trials are partitioned into fixed-size blocks; block b under hypothesis i
draws from a generator seeded by (seed, i, b) and nothing else, so estimates
are bit-identical for a given (seed, trials, block size) no matter how many
worker threads execute the blocks or in which order they finish.

In steady state the per-sensor slot sum is drawn directly as one Poisson
variate with N times the slot mean (the exact distribution of the sum); the
transient mode draws every slot at its fill-in mean.  All detectors in one
call share the same sampled counts, which removes sampling noise from
between-detector comparisons.
"""

from __future__ import annotations

import math

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import analysis
from .channel import ChannelParams, steady_mean, transient_means
from .detectors import (
    DetectorKind,
    DetectorSpec,
    ObservationBatch,
    per_sensor_llr,
    total_llr_rows,
)
from .sensing import SensingModel, make_soft_model, sample_sensing, sum_pmf

__all__ = ["SimConfig", "SimResult", "SweepEntry", "SWEEP_AXES",
           "sample_observation", "estimate_perf", "estimate_perf_multi",
           "sweep", "spec_for_threshold", "analytic_point"]

DEFAULT_TRIALS = 10 ** 6
DEFAULT_BLOCK = 8192


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls; the seed is required, never wall-clock derived."""

    seed: int
    trials: int = DEFAULT_TRIALS
    mode: str = "steady"
    scheme: str = "dtm"
    threads: int = 1
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.mode not in ("steady", "transient"):
            raise ValueError("mode must be 'steady' or 'transient'")
        if self.scheme not in ("dtm", "stm"):
            raise ValueError("scheme must be 'dtm' or 'stm'")
        if self.threads < 1 or self.block_size < 1:
            raise ValueError("threads and block_size must be positive")


@dataclass(frozen=True)
class SimResult:
    """Estimated error rates with raw success counts and 3-sigma half-widths."""

    pfa_hat: float
    pm_hat: float
    pfa_count: int
    pm_count: int
    trials: int
    seed: int
    pfa_ci: float
    pm_ci: float

    @property
    def pd_hat(self) -> float:
        return 1.0 - self.pm_hat


def _ci_half_width(p_hat: float, trials: int) -> float:
    return 3.0 * math.sqrt(p_hat * (1.0 - p_hat) / trials)


def _block_rng(seed: int, hypothesis: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, hypothesis, block)))


def _draw_sensed(model: SensingModel, hypothesis: int, shape, rng) -> np.ndarray:
    cdf = np.cumsum(model.pmf(hypothesis))
    idx = np.searchsorted(cdf, rng.random(shape), side="right")
    return model.grid[np.minimum(idx, model.L - 1)]


def _transient_scale(params: ChannelParams) -> np.ndarray:
    csum = np.cumsum(params.h)
    return csum[np.minimum(np.arange(params.N), params.k_max)]


def _sample_dtm_sums(model: SensingModel, params: ChannelParams, hypothesis: int,
                     n: int, rng, mode: str) -> np.ndarray:
    x = _draw_sensed(model, hypothesis, (n, params.M), rng)
    if mode == "steady":
        return rng.poisson(params.N * (x * params.A + params.J))
    means = params.J + x[:, :, None] * params.Amax * _transient_scale(params)[None, None, :]
    return rng.poisson(means).sum(axis=2)


def _sample_stm_sums(model: SensingModel, params: ChannelParams, hypothesis: int,
                     n: int, rng, mode: str) -> np.ndarray:
    x_total = _draw_sensed(model, hypothesis, (n, params.M), rng).sum(axis=1)
    if mode == "steady":
        return rng.poisson(params.N * params.J + x_total * params.N * params.A)
    means = params.J + x_total[:, None] * params.Amax * _transient_scale(params)[None, :]
    return rng.poisson(means).sum(axis=1)


def sample_observation(hypothesis: int, model: SensingModel, params: ChannelParams,
                       config: SimConfig, rng) -> ObservationBatch:
    """One decision window of slot counts, drawn slot by slot."""
    x = sample_sensing(model, hypothesis, params.M, rng)
    if config.scheme == "dtm":
        if config.mode == "steady":
            means = np.broadcast_to(
                steady_mean(x, params)[:, None], (params.M, params.N))
        else:
            means = np.stack([transient_means(v, params) for v in x]) \
                if params.M else np.empty((0, params.N))
        return ObservationBatch.dtm(rng.poisson(means))
    if config.mode == "steady":
        means = np.full(params.N, params.J + float(x.sum()) * params.A)
    else:
        scale = _transient_scale(params)
        means = params.J + float(x.sum()) * params.Amax * scale
    return ObservationBatch.stm(rng.poisson(means))


def _alarm_counts(specs, sums: np.ndarray, model: SensingModel,
                  params: ChannelParams, scheme: str) -> np.ndarray:
    """Number of abnormal decisions per spec on one block of sampled sums."""
    out = np.empty(len(specs), dtype=np.int64)
    llr_cache: dict[DetectorKind, np.ndarray] = {}
    for i, spec in enumerate(specs):
        if scheme == "stm":
            out[i] = int((sums > spec.threshold).sum())
        elif spec.kind is DetectorKind.MRC:
            out[i] = int((sums.sum(axis=1) > spec.threshold).sum())
        elif spec.kind is DetectorKind.TWO_STAGE:
            votes = (sums > spec.gamma_local).sum(axis=1)
            out[i] = int((votes > spec.gamma_global).sum())
        else:
            if spec.kind not in llr_cache:
                llr_cache[spec.kind] = total_llr_rows(spec.kind, sums, model, params)
            out[i] = int((llr_cache[spec.kind] > spec.threshold).sum())
    return out


def estimate_perf_multi(specs: list[DetectorSpec], model: SensingModel,
                        params: ChannelParams, config: SimConfig) -> list[SimResult]:
    """Monte Carlo (Pfa, Pm) for several detectors on shared samples."""
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one detector spec")
    for spec in specs:
        if spec.scheme != config.scheme:
            raise ValueError(f"{spec.kind.value} does not run on the "
                             f"{config.scheme} scheme")
    sampler = _sample_stm_sums if config.scheme == "stm" else _sample_dtm_sums
    n_blocks = -(-config.trials // config.block_size)

    def run_block(hypothesis: int, block: int) -> np.ndarray:
        lo = block * config.block_size
        n = min(config.block_size, config.trials - lo)
        rng = _block_rng(config.seed, hypothesis, block)
        sums = sampler(model, params, hypothesis, n, rng, config.mode)
        return _alarm_counts(specs, sums, model, params, config.scheme)

    jobs = [(hyp, b) for hyp in (0, 1) for b in range(n_blocks)]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda jb: (jb[0], run_block(*jb)), jobs))
    else:
        results = [(hyp, run_block(hyp, b)) for hyp, b in jobs]

    alarms = {0: np.zeros(len(specs), dtype=np.int64),
              1: np.zeros(len(specs), dtype=np.int64)}
    for hyp, counts in results:
        alarms[hyp] += counts

    out = []
    for i in range(len(specs)):
        pfa_count = int(alarms[0][i])
        pm_count = config.trials - int(alarms[1][i])
        pfa_hat = pfa_count / config.trials
        pm_hat = pm_count / config.trials
        out.append(SimResult(
            pfa_hat=pfa_hat, pm_hat=pm_hat, pfa_count=pfa_count,
            pm_count=pm_count, trials=config.trials, seed=config.seed,
            pfa_ci=_ci_half_width(pfa_hat, config.trials),
            pm_ci=_ci_half_width(pm_hat, config.trials)))
    return out


def estimate_perf(spec: DetectorSpec, model: SensingModel, params: ChannelParams,
                  config: SimConfig) -> SimResult:
    """Monte Carlo (Pfa, Pm) for one detector."""
    return estimate_perf_multi([spec], model, params, config)[0]


@dataclass(frozen=True)
class SweepEntry:
    """One (axis value, detector) cell of a sweep: spec used and its estimate."""

    axis: str
    value: float
    spec: DetectorSpec
    result: SimResult
    status: str = "ok"


SWEEP_AXES = ("A", "J", "M", "N", "L", "trials")


def _apply_axis(axis: str, value, model: SensingModel, params: ChannelParams,
                config: SimConfig, soft_shape=None):
    if axis == "trials":
        return model, params, replace(config, trials=int(value))
    if axis == "L":
        if soft_shape is None:
            raise ValueError("sweeping L needs the soft shape parameters (b0, b1)")
        return make_soft_model(int(value), *soft_shape), params, config
    if axis in ("M", "N"):
        return model, replace(params, **{axis: int(value)}), config
    if axis == "A":
        # Rescale the release size so the channel shape h is preserved.
        total_h = float(np.asarray(params.h).sum())
        if total_h == 0.0:
            return model, ChannelParams.from_gain(float(value), params.J,
                                                  params.N, params.M), config
        return model, replace(params, Amax=float(value) / total_h,
                              A=float(value)), config
    if axis == "J":
        return model, replace(params, J=float(value)), config
    raise ValueError(f"unknown sweep axis {axis!r} (expected one of {SWEEP_AXES})")


def spec_for_threshold(kind: DetectorKind, threshold) -> DetectorSpec:
    """Wrap a calibrated threshold (scalar or two-stage pair) in a spec."""
    if kind is DetectorKind.TWO_STAGE:
        return DetectorSpec(kind=kind, gamma_local=threshold[0],
                            gamma_global=threshold[1])
    return DetectorSpec(kind=kind, threshold=threshold)


def sweep(axis: str, values, model: SensingModel, params: ChannelParams,
          config: SimConfig, kinds, target_pfa: float,
          soft_shape=None) -> list[SweepEntry]:
    """Recalibrate each detector at each axis value, then estimate its errors.

    Thresholds come from the exact calibration at ``target_pfa``; estimates
    for all detectors at one axis value share the same sampled counts.  A
    calibration landing on a degenerate operating point (zero detection
    power) flags the row ``boundary`` instead of dropping it.
    """
    kinds = [DetectorKind(k) for k in kinds]
    entries = []
    for value in values:
        model_v, params_v, config_v = _apply_axis(axis, value, model, params,
                                                  config, soft_shape)
        specs, statuses = [], []
        for kind in kinds:
            threshold = analysis.calibrate_threshold(kind, model_v, params_v,
                                                     target_pfa)
            specs.append(spec_for_threshold(kind, threshold))
            try:
                point = analytic_point(kind, model_v, params_v, threshold)
            except ValueError:
                statuses.append("ok")  # beyond the exact-evaluation envelope
            else:
                statuses.append("boundary" if point.pd <= point.uncertainty
                                else "ok")
        by_scheme = {}
        for i, spec in enumerate(specs):
            by_scheme.setdefault(spec.scheme, []).append(i)
        results: list[SimResult | None] = [None] * len(specs)
        for scheme, idxs in by_scheme.items():
            cfg = replace(config_v, scheme=scheme)
            for i, res in zip(idxs, estimate_perf_multi([specs[i] for i in idxs],
                                                        model_v, params_v, cfg)):
                results[i] = res
        for kind, spec, res, status in zip(kinds, specs, results, statuses):
            entries.append(SweepEntry(axis=axis, value=value, spec=spec,
                                      result=res, status=status))
    return entries


def analytic_point(kind: DetectorKind, model: SensingModel,
                   params: ChannelParams, threshold) -> analysis.PerfPoint:
    """Exact (Pfa, Pd) of one detector at one threshold, route chosen by kind.

    Summed-statistic rules go through the joint enumeration, which is exact
    only up to M = 6 sensors and raises beyond that.
    """
    if kind is DetectorKind.OPT_STM:
        return analysis.stm_perf_closed_form(sum_pmf(model, params.M), params,
                                             threshold)
    if kind is DetectorKind.MRC:
        return analysis.mrc_perf_closed_form(sum_pmf(model, params.M), params,
                                             threshold)
    if kind is DetectorKind.TWO_STAGE:
        return analysis.two_stage_perf(model, params, *threshold)
    return analysis.exact_perf_llr_sum(per_sensor_llr(kind, model, params),
                                       model, params, threshold)
