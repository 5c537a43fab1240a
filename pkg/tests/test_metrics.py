import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgeaoi.metrics import DistributionCurve, jain_index, percentile
from edgeaoi.numerics import NumericsError


class TestDistributionCurve:
    def test_rejects_decreasing_abscissas(self):
        with pytest.raises(ValueError):
            DistributionCurve([0.0, 0.0], [0.1, 0.2])

    def test_rejects_decreasing_probability(self):
        with pytest.raises(NumericsError):
            DistributionCurve([0.0, 1.0], [0.5, 0.2])

    def test_exponential_median_on_grid(self):
        grid = np.linspace(0.0, 10.0, 10001)
        curve = DistributionCurve(grid, 1 - np.exp(-grid))
        assert curve.percentile(50) == pytest.approx(math.log(2), abs=2e-3)

    def test_high_percentile_hits_last_point(self):
        curve = DistributionCurve([0.0, 1.0, 2.0], [0.0, 0.5, 1.0])
        assert curve.percentile(99.999) == 2.0

    def test_degenerate_step(self):
        curve = DistributionCurve([3.0, 4.0], [1.0, 1.0])
        for p in (1, 50, 99):
            assert curve.percentile(p) == 3.0

    def test_percentile_beyond_curve_raises(self):
        curve = DistributionCurve([0.0, 1.0], [0.0, 0.4])
        with pytest.raises(ValueError):
            curve.percentile(50)

    def test_evaluate_steps(self):
        curve = DistributionCurve([1.0, 2.0], [0.3, 1.0])
        assert curve.evaluate(0.5) == 0.0
        assert curve.evaluate(1.0) == pytest.approx(0.3)
        assert curve.evaluate(5.0) == 1.0


class TestPercentile:
    def test_samples_median(self):
        assert percentile([3.0, 1.0, 2.0], 50) == 2.0

    def test_single_sample(self):
        assert percentile([7.0], 90) == 7.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            percentile([], 50)


class TestJainIndex:
    def test_equal_allocation(self):
        assert jain_index([2.0, 2.0, 2.0]) == pytest.approx(1.0)

    def test_known_value(self):
        assert jain_index([1.0, 2.0, 3.0]) == pytest.approx(6 / 7)

    def test_single_dominant_tends_to_reciprocal(self):
        n = 8
        values = [1.0] + [1e-9] * (n - 1)
        assert jain_index(values) == pytest.approx(1.0 / n, rel=1e-6)

    @given(st.lists(st.floats(0.01, 100.0), min_size=1, max_size=12),
           st.floats(0.01, 50.0))
    def test_scale_invariance(self, values, c):
        assert jain_index(values) == pytest.approx(
            jain_index([c * v for v in values]), abs=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            jain_index([1.0, 0.0])
