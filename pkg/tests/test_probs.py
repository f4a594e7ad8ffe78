import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from emofocus.errors import DegenerateDistributionError, UsageError
from emofocus.probs import Distribution, LOG_ZERO, log_sum_exp, normalize, uniform

finite_logits = st.lists(
    st.floats(min_value=-700.0, max_value=10.0), min_size=1, max_size=24
)

# Logits on a 1e-3 grid: mass orderings survive the normalization shift,
# unlike sub-ulp differences that vanish under float subtraction.
grid_logits = st.lists(
    st.integers(min_value=-700_000, max_value=10_000).map(lambda n: n / 1000.0),
    min_size=1,
    max_size=24,
)


class TestLogSumExp:
    def test_probabilities_summing_to_one(self):
        assert log_sum_exp([math.log(0.5), math.log(0.5)]) == pytest.approx(
            0.0, abs=1e-15
        )

    def test_absorbs_zero_mass(self):
        assert log_sum_exp([LOG_ZERO, math.log(0.25)]) == pytest.approx(
            math.log(0.25), rel=1e-15
        )

    def test_extreme_values_no_overflow(self):
        # Oracle: with 50-digit arithmetic, log(2*exp(-1000)) = log 2 - 1000.
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 50
        expected = float(mpmath.log(2 * mpmath.exp(-1000)))
        got = log_sum_exp([-1000.0, -1000.0])
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(-1000.0 + math.log(2.0), rel=1e-12)

    def test_all_zero_mass(self):
        assert log_sum_exp([LOG_ZERO, LOG_ZERO]) == LOG_ZERO

    def test_empty_is_usage_error(self):
        with pytest.raises(UsageError):
            log_sum_exp([])

    @given(finite_logits)
    def test_matches_direct_sum(self, values):
        direct = sum(math.exp(v) for v in values)
        assert direct > 0.0
        assert math.exp(log_sum_exp(values)) == pytest.approx(direct, rel=1e-12)


class TestDistribution:
    def test_rejects_nan(self):
        with pytest.raises(UsageError):
            Distribution(("a", "b"), np.array([0.0, float("nan")]))

    def test_rejects_positive_infinity(self):
        with pytest.raises(UsageError):
            Distribution(("a",), np.array([float("inf")]))

    def test_rejects_duplicates(self):
        with pytest.raises(UsageError):
            Distribution(("a", "a"), np.array([0.0, 0.0]))

    def test_rejects_empty(self):
        with pytest.raises(UsageError):
            Distribution((), np.array([]))

    def test_argmax_ties_to_earliest(self):
        d = Distribution(("a", "b", "c"), np.array([-1.0, -0.5, -0.5]))
        assert d.argmax() == "b"


class TestNormalize:
    def test_symmetric_masses(self):
        d = normalize(
            Distribution(("a", "b"), np.array([math.log(2.0), math.log(2.0)]))
        )
        np.testing.assert_allclose(d.logits, [math.log(0.5)] * 2, rtol=1e-15)

    def test_point_mass_unchanged(self):
        d = normalize(Distribution(("a", "b"), np.array([0.0, LOG_ZERO])))
        assert d.logits[0] == 0.0
        assert d.logits[1] == LOG_ZERO

    def test_direct_arithmetic(self):
        d = normalize(
            Distribution(("a", "b"), np.array([math.log(3.0), math.log(1.0)]))
        )
        np.testing.assert_allclose(
            np.exp(d.logits), [0.75, 0.25], rtol=1e-15
        )

    def test_all_zero_is_degenerate(self):
        with pytest.raises(DegenerateDistributionError):
            normalize(Distribution(("a", "b"), np.array([LOG_ZERO, LOG_ZERO])))

    @given(finite_logits)
    def test_idempotent_bit_for_bit(self, values):
        once = normalize(Distribution(tuple(range(len(values))), np.array(values)))
        twice = normalize(once)
        assert twice is once

    @given(finite_logits)
    def test_sums_to_one(self, values):
        d = normalize(Distribution(tuple(range(len(values))), np.array(values)))
        assert float(np.exp(d.logits).sum()) == pytest.approx(1.0, abs=1e-9)

    @given(grid_logits)
    def test_preserves_mass_ordering(self, values):
        raw = Distribution(tuple(range(len(values))), np.array(values))
        d = normalize(raw)
        assert d.argmax() == raw.argmax()
        assert list(np.argsort(-d.logits, kind="stable")) == list(
            np.argsort(-raw.logits, kind="stable")
        )

    @given(finite_logits, st.floats(min_value=-50.0, max_value=50.0))
    def test_shift_invariance(self, values, shift):
        base = normalize(Distribution(tuple(range(len(values))), np.array(values)))
        shifted = normalize(
            Distribution(tuple(range(len(values))), np.array(values) + shift)
        )
        np.testing.assert_allclose(
            np.exp(shifted.logits), np.exp(base.logits), atol=1e-12
        )


def test_uniform():
    d = uniform(("x", "y", "z", "w"))
    np.testing.assert_allclose(np.exp(d.logits), 0.25, rtol=1e-15)
    assert d.normalized
