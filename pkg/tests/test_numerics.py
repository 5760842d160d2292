"""Log-domain building blocks: reductions and infinity conventions."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcfusion.numerics import (
    combine_llr_rows,
    combine_llrs,
    log_slot_sum_weight,
    logsumexp,
)


class TestLogSumExp:
    def test_matches_naive_on_small_inputs(self):
        a = np.array([-1.0, 0.5, 2.0])
        assert logsumexp(a) == pytest.approx(math.log(np.exp(a).sum()), rel=1e-14)

    def test_large_magnitudes_do_not_overflow(self):
        a = np.array([1e4, 1e4 - 3.0])
        expected = 1e4 + math.log(1.0 + math.exp(-3.0))
        assert logsumexp(a) == pytest.approx(expected, rel=1e-14)

    def test_all_minus_inf_gives_minus_inf(self):
        assert logsumexp(np.array([-math.inf, -math.inf])) == -math.inf

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            logsumexp(np.array([]))

    def test_axis_reduction(self):
        a = np.array([[0.0, 0.0], [-math.inf, 0.0]])
        out = logsumexp(a, axis=1)
        assert out[0] == pytest.approx(math.log(2.0))
        assert out[1] == pytest.approx(0.0)

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
    def test_shift_invariance(self, values):
        a = np.array(values)
        assert logsumexp(a + 7.25) == pytest.approx(logsumexp(a) + 7.25,
                                                    abs=1e-10)


class TestLogSlotSumWeight:
    def test_generic_value(self):
        # sigma*log(mean) - N*mean for mean 2.5, sigma 3, N 4
        out = log_slot_sum_weight(np.array([2.5]), np.array([3.0]), 4)
        assert out[0] == pytest.approx(3.0 * math.log(2.5) - 10.0, rel=1e-14)

    def test_zero_mean_zero_count_is_certain(self):
        # Poisson(0) is a point mass at zero: log-weight 0, not NaN.
        out = log_slot_sum_weight(np.array([0.0]), np.array([0.0]), 5)
        assert out[0] == 0.0

    def test_zero_mean_positive_count_is_impossible(self):
        out = log_slot_sum_weight(np.array([0.0]), np.array([2.0]), 5)
        assert out[0] == -math.inf


class TestCombineLlrs:
    def test_finite_sum(self):
        assert combine_llrs(np.array([1.0, -0.25])) == pytest.approx(0.75)

    def test_single_plus_inf_dominates(self):
        assert combine_llrs(np.array([math.inf, -3.0])) == math.inf

    def test_single_minus_inf_dominates(self):
        assert combine_llrs(np.array([-math.inf, 3.0])) == -math.inf

    def test_mixed_infinities_cancel_to_zero(self):
        # One sensor certain of each hypothesis: the evidence cancels.
        assert combine_llrs(np.array([math.inf, -math.inf, 1.0])) == 0.0

    def test_row_version_matches_scalar(self):
        rows = np.array([[1.0, 2.0],
                         [math.inf, -math.inf],
                         [-math.inf, 0.0]])
        out = combine_llr_rows(rows)
        assert out[0] == pytest.approx(3.0)
        assert out[1] == 0.0
        assert out[2] == -math.inf
