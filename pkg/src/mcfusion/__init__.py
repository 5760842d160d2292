"""Cooperative abnormality detection over Poisson molecular reporting channels.

Sensors observe an abnormality level on a discrete grid and report through a
diffusive channel whose receptions are Poisson counts.  The package models
the sensing stage, the reporting channel, six fusion detectors over the two
reporting schemes (per-sensor slots vs a shared total), exact error
probabilities, Chernoff bounds and exponents, and seeded Monte Carlo
estimation, all exposed through the ``mcfusion`` command-line tool.
"""

from .analysis import (
    CountPMF,
    PerfPoint,
    calibrate_threshold,
    count_pmf_pair,
    exact_perf_llr_sum,
    mrc_perf_closed_form,
    per_sensor_count_pmf,
    poisson_tail,
    roc_curve,
    stm_perf_closed_form,
    total_statistic_distribution,
    two_stage_perf,
)
from .asymptotics import (
    ExponentCurve,
    OptimalTilt,
    chernoff_bounds,
    chernoff_exponent,
    exponent_curve,
    optimize_s,
)
from .channel import (
    ChannelParams,
    DiffusionGeometry,
    default_k_max,
    hitting_probabilities,
    steady_mean,
    transient_means,
)
from .detectors import (
    DetectorKind,
    DetectorSpec,
    ObservationBatch,
    decide,
    decide_batch,
    llr_cv,
    llr_maxlog_sensor,
    llr_mrc,
    llr_opt_dtm_sensor,
    llr_opt_dtm_total,
    llr_stm,
    per_sensor_llr,
)
from .montecarlo import (
    SimConfig,
    SimResult,
    SweepEntry,
    analytic_point,
    estimate_perf,
    estimate_perf_multi,
    sample_observation,
    spec_for_threshold,
    sweep,
)
from .sensing import (
    HardSensingModel,
    SensingModel,
    SumSensingPMF,
    hard_from_soft,
    make_soft_model,
    sample_sensing,
    sum_pmf,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # sensing
    "SensingModel", "HardSensingModel", "SumSensingPMF",
    "make_soft_model", "hard_from_soft", "sample_sensing", "sum_pmf",
    # channel
    "DiffusionGeometry", "ChannelParams", "default_k_max",
    "hitting_probabilities", "steady_mean", "transient_means",
    # detectors
    "DetectorKind", "DetectorSpec", "ObservationBatch",
    "llr_opt_dtm_sensor", "llr_opt_dtm_total", "llr_maxlog_sensor",
    "llr_mrc", "llr_cv", "llr_stm", "per_sensor_llr",
    "decide", "decide_batch",
    # analysis
    "CountPMF", "PerfPoint", "poisson_tail", "per_sensor_count_pmf",
    "count_pmf_pair", "exact_perf_llr_sum", "stm_perf_closed_form",
    "mrc_perf_closed_form", "two_stage_perf", "total_statistic_distribution",
    "roc_curve", "calibrate_threshold",
    # asymptotics
    "OptimalTilt", "ExponentCurve", "chernoff_exponent", "chernoff_bounds",
    "optimize_s", "exponent_curve",
    # monte carlo
    "SimConfig", "SimResult", "SweepEntry", "sample_observation",
    "spec_for_threshold", "analytic_point", "estimate_perf",
    "estimate_perf_multi", "sweep",
]
