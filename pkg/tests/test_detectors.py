"""Decision statistics: frozen high-precision values, collapses, monotonicity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcfusion.channel import ChannelParams
from mcfusion.detectors import (
    DetectorKind,
    DetectorSpec,
    ObservationBatch,
    cv_estimate,
    decide,
    decide_batch,
    decide_mrc,
    decide_stm_sum,
    decide_two_stage,
    llr_cv,
    llr_maxlog_sensor,
    llr_mrc,
    llr_opt_dtm_sensor,
    llr_opt_dtm_total,
    llr_stm,
    per_sensor_llr,
)
from mcfusion.sensing import SensingModel, make_soft_model, sum_pmf

# 60-digit-oracle values of the optimal per-sensor statistic,
# L=4 soft model (b0=-2.5, b1=3.5), A=6, J=4, N=10.
OPT_L4_ORACLE = [
    (0, -3.3297585441931436),
    (30, -3.3286618740438031),
    (60, -1.1938538684612017),
    (90, 1.7809928932586846),
    (120, 2.667977834151488),
]

# Same statistic at the two-level scale L=2, A=15, J=4, N=1.
OPT_L2_ORACLE = [
    (0, -3.4508505790477726),
    (5, -3.4267213678319594),
    (10, 0.51033545322685),
    (20, 2.5491381540279174),
    (40, 2.5491393160199291),
]

# Shared-molecule statistic, M=2 of the L=4 soft model, A=6, J=4, N=10.
STM_M2_ORACLE = [
    (0, -6.6595170883862872),
    (50, -5.1620790865385469),
    (100, -0.49673130476355879),
    (200, 5.3356306975493063),
]

MODEL_L4 = make_soft_model(4, -2.5, 3.5)
MODEL_L2 = make_soft_model(2, -2.5, 3.5)
PARAMS_FIG2 = ChannelParams.from_gain(6.0, 4.0, 10, 1)
PARAMS_FIG3 = ChannelParams.from_gain(15.0, 4.0, 1, 2)

ordered_models = st.builds(
    lambda L, b0, gap: make_soft_model(L, b0, b0 + gap),
    st.integers(2, 5), st.floats(-3.0, 3.0), st.floats(0.0, 4.0))
small_params = st.builds(
    lambda A, J, N: ChannelParams.from_gain(A, J, N, 1),
    st.floats(0.5, 10.0), st.floats(0.1, 5.0), st.integers(1, 3))


class TestOptimalPerSensor:
    @pytest.mark.parametrize("sigma,expected", OPT_L4_ORACLE)
    def test_frozen_oracle_l4(self, sigma, expected):
        got = llr_opt_dtm_sensor(sigma, MODEL_L4, PARAMS_FIG2)
        assert got == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("sigma,expected", OPT_L2_ORACLE)
    def test_frozen_oracle_l2(self, sigma, expected):
        got = llr_opt_dtm_sensor(sigma, MODEL_L2, PARAMS_FIG3)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_two_level_model_matches_direct_ratio_form(self):
        # Independent two-term evaluation of the hard-sensor statistic.
        p0, p1 = 0.12, 0.07
        m = SensingModel.from_hard(p0, p1)
        p = ChannelParams.from_gain(9.0, 2.0, 3, 1)
        for sigma in range(0, 80, 7):
            v0 = math.exp(-p.N * p.J) * p.J ** sigma
            v1 = math.exp(-p.N * (p.A + p.J)) * (p.A + p.J) ** sigma
            direct = math.log(p1 * v0 + (1 - p1) * v1) \
                - math.log((1 - p0) * v0 + p0 * v1)
            assert llr_opt_dtm_sensor(sigma, m, p) == pytest.approx(
                direct, abs=1e-9)

    def test_identical_hypotheses_give_zero(self):
        m = SensingModel(g0=MODEL_L4.g0, g1=MODEL_L4.g0)
        for sigma in (0, 17, 400):
            assert llr_opt_dtm_sensor(sigma, m, PARAMS_FIG2) == 0.0

    def test_ideal_sensors_collapse_to_count_combining(self):
        # Delta sensing masses leave a single term per hypothesis.
        m = SensingModel(g0=np.array([1.0, 0.0]), g1=np.array([0.0, 1.0]))
        p = ChannelParams.from_gain(6.0, 4.0, 10, 1)
        sig = np.arange(0, 200)
        np.testing.assert_allclose(llr_opt_dtm_sensor(sig, m, p),
                                   llr_mrc(sig, p), rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(llr_maxlog_sensor(sig, m, p),
                                   llr_mrc(sig, p), rtol=1e-12, atol=1e-9)

    def test_finite_at_extreme_dynamic_range(self):
        p = ChannelParams.from_gain(1e3, 1.0, 1000, 1)
        assert math.isfinite(llr_opt_dtm_sensor(10 ** 6, MODEL_L4, p))

    def test_zero_noise_zero_level_point_mass(self):
        # With J=0 the silent level is a point mass at zero counts.
        p = ChannelParams.from_gain(6.0, 0.0, 2, 1)
        v0 = llr_opt_dtm_sensor(0, MODEL_L2, p)
        w1 = math.log(float(MODEL_L2.g1[0]) + float(MODEL_L2.g1[1])
                      * math.exp(-p.N * p.A))
        w0 = math.log(float(MODEL_L2.g0[0]) + float(MODEL_L2.g0[1])
                      * math.exp(-p.N * p.A))
        assert v0 == pytest.approx(w1 - w0, abs=1e-12)
        v5 = llr_opt_dtm_sensor(5, MODEL_L2, p)
        direct = math.log(float(MODEL_L2.g1[1]) / float(MODEL_L2.g0[1]))
        assert v5 == pytest.approx(direct, abs=1e-12)

    @given(ordered_models, small_params)
    @settings(max_examples=50, deadline=None)
    def test_monotone_under_ratio_condition(self, m, p):
        assert m.has_monotone_likelihood_ratio()
        top = int(10 * p.N * (p.A + p.J)) + 2
        vals = llr_opt_dtm_sensor(np.arange(top), m, p)
        assert np.all(np.diff(vals) >= -1e-9)


class TestMaxLog:
    def test_sandwich_within_log_l(self):
        sig = np.arange(0, 400)
        opt = llr_opt_dtm_sensor(sig, MODEL_L4, PARAMS_FIG2)
        apx = llr_maxlog_sensor(sig, MODEL_L4, PARAMS_FIG2)
        assert np.max(np.abs(opt - apx)) <= math.log(MODEL_L4.L) + 1e-9

    def test_matches_bruteforce_argmax(self):
        grid, p = MODEL_L4.grid, PARAMS_FIG2
        for sigma in range(0, 150, 3):
            terms1 = np.log(MODEL_L4.g1) - p.N * (grid * p.A + p.J) \
                + sigma * np.log(grid * p.A + p.J)
            terms0 = np.log(MODEL_L4.g0) - p.N * (grid * p.A + p.J) \
                + sigma * np.log(grid * p.A + p.J)
            expected = float(terms1.max() - terms0.max())
            assert llr_maxlog_sensor(sigma, MODEL_L4, p) == pytest.approx(
                expected, abs=1e-12)

    def test_piecewise_linear_between_breakpoints(self):
        # Second differences vanish except where an argmax switches.
        sig = np.arange(0, 200)
        vals = llr_maxlog_sensor(sig, MODEL_L4, PARAMS_FIG2)
        second = np.diff(vals, 2)
        n_breaks = int(np.sum(np.abs(second) > 1e-9))
        # Each argmax switch lands between integer counts, so a single kink
        # spreads over two consecutive second differences.
        assert 1 <= n_breaks <= 4 * (MODEL_L4.L - 1)


class TestCountCombining:
    def test_zero_count_value(self):
        p = ChannelParams.from_gain(6.0, 4.0, 10, 1)
        assert llr_mrc(0, p) == pytest.approx(-60.0)

    def test_zero_gain_is_identically_zero(self):
        p = ChannelParams.from_gain(0.0, 4.0, 10, 1)
        assert llr_mrc(123, p) == 0.0

    def test_slope_and_zero_crossing(self):
        p = ChannelParams.from_gain(6.0, 4.0, 10, 1)
        slope = llr_mrc(1, p) - llr_mrc(0, p)
        assert slope == pytest.approx(math.log(2.5), rel=1e-12)
        crossing = 60.0 / math.log(2.5)
        assert llr_mrc(math.floor(crossing), p) < 0.0
        assert llr_mrc(math.ceil(crossing), p) > 0.0

    def test_zero_noise_rejected(self):
        p = ChannelParams.from_gain(6.0, 0.0, 10, 1)
        with pytest.raises(ValueError):
            llr_mrc(3, p)

    def test_count_rule_equals_mapped_statistic_rule(self):
        p = ChannelParams.from_gain(6.0, 4.0, 2, 3)
        gamma_count = 40
        # The half-step offset keeps the mapped threshold strictly between
        # adjacent attainable statistic values, avoiding float ties.
        gamma_llr = p.M * (-p.N * p.A) \
            + (gamma_count + 0.5) * math.log1p(p.A / p.J)
        rng = np.random.default_rng(0)
        for _ in range(200):
            counts = rng.integers(0, 12, size=(p.M, p.N))
            batch = ObservationBatch.dtm(counts)
            total_llr = float(np.sum(llr_mrc(batch.per_sensor_sums, p)))
            assert decide_mrc(batch, gamma_count) == decide(total_llr,
                                                            gamma_llr)


class TestCV:
    def test_zero_count_estimates_silence(self):
        assert cv_estimate(0, PARAMS_FIG2, MODEL_L4.grid) == 0.0

    def test_saturates_at_full_abnormality(self):
        assert cv_estimate(10_000, PARAMS_FIG2, MODEL_L4.grid) == 1.0

    def test_staircase_matches_bruteforce_and_is_monotone(self):
        grid, p = MODEL_L4.grid, PARAMS_FIG2
        prev = -1.0
        for sigma in range(0, 400):
            objective = -p.N * (grid * p.A + p.J) \
                + sigma * np.log(grid * p.A + p.J)
            expected = grid[int(np.argmax(objective))]
            got = cv_estimate(sigma, p, grid)
            assert got == expected
            assert got >= prev
            prev = got

    def test_plateau_values_are_the_grid_ratios(self):
        vals = {llr_cv(s, MODEL_L4, PARAMS_FIG2) for s in range(0, 500, 5)}
        expected = np.log(MODEL_L4.g1 / MODEL_L4.g0)
        for v in vals:
            assert np.min(np.abs(expected - v)) < 1e-12
        assert len(vals) >= 2

    def test_identical_hypotheses_give_zero(self):
        m = SensingModel(g0=MODEL_L4.g0, g1=MODEL_L4.g0)
        assert llr_cv(123, m, PARAMS_FIG2) == 0.0

    def test_ideal_sensors_give_sentinels(self):
        m = SensingModel(g0=np.array([1.0, 0.0]), g1=np.array([0.0, 1.0]))
        p = ChannelParams.from_gain(6.0, 4.0, 10, 1)
        out = {llr_cv(s, m, p) for s in range(0, 200, 10)}
        assert out <= {math.inf, -math.inf}
        assert len(out) == 2


class TestSTM:
    @pytest.mark.parametrize("sigma,expected", STM_M2_ORACLE)
    def test_frozen_oracle(self, sigma, expected):
        spmf = sum_pmf(MODEL_L4, 2)
        p = ChannelParams.from_gain(6.0, 4.0, 10, 2)
        assert llr_stm(sigma, spmf, p) == pytest.approx(expected, abs=1e-10)

    def test_single_sensor_reduces_to_per_sensor_statistic(self):
        spmf = sum_pmf(MODEL_L4, 1)
        p = ChannelParams.from_gain(6.0, 4.0, 10, 1)
        for sigma in (0, 25, 60, 110):
            assert llr_stm(sigma, spmf, p) == pytest.approx(
                llr_opt_dtm_sensor(sigma, MODEL_L4, p), abs=1e-12)

    def test_identical_hypotheses_give_zero(self):
        m = SensingModel(g0=MODEL_L4.g0, g1=MODEL_L4.g0)
        spmf = sum_pmf(m, 3)
        p = ChannelParams.from_gain(6.0, 4.0, 10, 3)
        assert llr_stm(42, spmf, p) == 0.0

    def test_increasing_for_ordered_model(self):
        spmf = sum_pmf(MODEL_L4, 2)
        p = ChannelParams.from_gain(6.0, 4.0, 10, 2)
        vals = llr_stm(np.arange(0, 501), spmf, p)
        diffs = np.diff(vals)
        assert np.all(diffs >= -1e-12)
        # Strict until the statistic saturates at its top plateau in float64.
        assert np.all(diffs[:300] > 0.0)

    def test_finite_at_extreme_dynamic_range(self):
        spmf = sum_pmf(MODEL_L4, 2)
        p = ChannelParams.from_gain(1e3, 1.0, 1000, 2)
        assert math.isfinite(llr_stm(10 ** 6, spmf, p))

    def test_sensor_count_mismatch_rejected(self):
        spmf = sum_pmf(MODEL_L4, 2)
        p = ChannelParams.from_gain(6.0, 4.0, 10, 3)
        with pytest.raises(ValueError):
            llr_stm(10, spmf, p)

    def test_count_rule_agrees_with_statistic_rule(self):
        # Strict monotonicity makes the two decision forms identical.
        spmf = sum_pmf(MODEL_L4, 2)
        p = ChannelParams.from_gain(6.0, 4.0, 10, 2)
        gamma_count = 90
        gamma_llr = llr_stm(gamma_count, spmf, p)
        rng = np.random.default_rng(1)
        for _ in range(300):
            counts = rng.poisson(9.0, size=p.N)
            batch = ObservationBatch.stm(counts)
            total = int(batch.total)
            assert decide_stm_sum(batch, gamma_count) == decide(
                llr_stm(total, spmf, p), gamma_llr)


class TestTotalsAndDecisions:
    def test_total_is_sum_of_per_sensor_statistics(self):
        p = ChannelParams.from_gain(6.0, 4.0, 10, 3)
        counts = np.array([[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]] * 3)
        batch = ObservationBatch.dtm(counts)
        expected = sum(llr_opt_dtm_sensor(int(s), MODEL_L4, p)
                       for s in batch.per_sensor_sums)
        assert llr_opt_dtm_total(batch, MODEL_L4, p) == pytest.approx(
            expected, rel=1e-12)

    def test_single_sensor_total_is_the_sensor_statistic(self):
        p = ChannelParams.from_gain(6.0, 4.0, 2, 1)
        batch = ObservationBatch.dtm(np.array([[3, 9]]))
        assert llr_opt_dtm_total(batch, MODEL_L4, p) == pytest.approx(
            llr_opt_dtm_sensor(12, MODEL_L4, p))

    def test_tie_decides_normal(self):
        assert decide(0.0, 0.0) == 0
        assert decide(-3.2, -3.1) == 0
        assert decide(math.inf, 1e308) == 1
        assert decide(-math.inf, -1e308) == 0

    def test_count_decisions(self):
        batch = ObservationBatch.dtm(np.zeros((2, 3), dtype=int))
        assert decide_mrc(batch, 0) == 0
        batch10 = ObservationBatch.dtm(np.array([[4, 2], [3, 1]]))
        assert decide_mrc(batch10, 9) == 1
        stm = ObservationBatch.stm(np.zeros(4, dtype=int))
        assert decide_stm_sum(stm, 0) == 0
        assert decide_stm_sum(stm, -1) == 1

    def test_two_stage_rule(self):
        batch = ObservationBatch.dtm(np.array([[5], [2], [9]]))
        assert decide_two_stage(batch, gamma_local=4, gamma_global=1) == 1
        assert decide_two_stage(batch, gamma_local=4, gamma_global=2) == 0
        # A global threshold of M can never be exceeded.
        assert decide_two_stage(batch, gamma_local=-1, gamma_global=3) == 0
        # Global threshold 0 is the OR rule.
        assert decide_two_stage(batch, gamma_local=8, gamma_global=0) == 1

    def test_scheme_mismatch_rejected(self):
        stm = ObservationBatch.stm(np.array([1, 2]))
        with pytest.raises(ValueError):
            decide_two_stage(stm, 0, 0)
        with pytest.raises(ValueError):
            decide_mrc(stm, 0)
        dtm = ObservationBatch.dtm(np.array([[1, 2]]))
        with pytest.raises(ValueError):
            decide_stm_sum(dtm, 0)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ObservationBatch.dtm(np.array([[1, -2]]))

    def test_decide_batch_dispatches_every_kind(self):
        p = ChannelParams.from_gain(15.0, 4.0, 1, 2)
        spmf = sum_pmf(MODEL_L2, 2)
        dtm = ObservationBatch.dtm(np.array([[30], [2]]))
        stm = ObservationBatch.stm(np.array([55]))
        specs = {
            DetectorKind.OPT_DTM: DetectorSpec(kind=DetectorKind.OPT_DTM,
                                               threshold=0.0),
            DetectorKind.MAX_LOG: DetectorSpec(kind=DetectorKind.MAX_LOG,
                                               threshold=0.0),
            DetectorKind.CV: DetectorSpec(kind=DetectorKind.CV, threshold=0.0),
            DetectorKind.MRC: DetectorSpec(kind=DetectorKind.MRC, threshold=25),
            DetectorKind.TWO_STAGE: DetectorSpec(kind=DetectorKind.TWO_STAGE,
                                                 gamma_local=10,
                                                 gamma_global=0),
            DetectorKind.OPT_STM: DetectorSpec(kind=DetectorKind.OPT_STM,
                                               threshold=40),
        }
        for kind, spec in specs.items():
            batch = stm if kind is DetectorKind.OPT_STM else dtm
            out = decide_batch(spec, batch, MODEL_L2, p, spmf=spmf)
            assert out in (0, 1)
        # Spot-check two dispatches against the primitive rules.
        assert decide_batch(specs[DetectorKind.MRC], dtm, MODEL_L2, p) \
            == decide_mrc(dtm, 25)
        assert decide_batch(specs[DetectorKind.OPT_STM], stm, MODEL_L2, p,
                            spmf=spmf) == decide_stm_sum(stm, 40)

    def test_per_sensor_llr_factory_matches_direct_calls(self):
        p = ChannelParams.from_gain(6.0, 4.0, 10, 1)
        sig = np.arange(0, 50)
        pairs = [
            (DetectorKind.OPT_DTM, llr_opt_dtm_sensor(sig, MODEL_L4, p)),
            (DetectorKind.MAX_LOG, llr_maxlog_sensor(sig, MODEL_L4, p)),
            (DetectorKind.CV, llr_cv(sig, MODEL_L4, p)),
            (DetectorKind.MRC, llr_mrc(sig, p)),
        ]
        for kind, expected in pairs:
            fn = per_sensor_llr(kind, MODEL_L4, p)
            np.testing.assert_allclose(fn(sig), expected, rtol=1e-12)


class TestSpecValidation:
    def test_two_stage_needs_both_thresholds(self):
        with pytest.raises(ValueError):
            DetectorSpec(kind=DetectorKind.TWO_STAGE, threshold=1.0)

    def test_count_kind_rejects_fractional_threshold(self):
        with pytest.raises(ValueError):
            DetectorSpec(kind=DetectorKind.MRC, threshold=2.5)

    def test_degenerate_global_threshold_always_alarms(self):
        # Like the other count rules, any threshold value is legal; below
        # zero the vote rule fires unconditionally.
        batch = ObservationBatch.dtm(np.array([[1], [2]]))
        assert decide_two_stage(batch, 10 ** 9, -1) == 1

    def test_scheme_property(self):
        assert DetectorSpec(kind=DetectorKind.OPT_STM, threshold=3).scheme \
            == "stm"
        assert DetectorSpec(kind=DetectorKind.CV, threshold=0.1).scheme \
            == "dtm"
