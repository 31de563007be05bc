import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import mase_reference, median_reference, random_forecasts, wql_reference
from tsportfolio.core import QuantileForecast, TimeSeries
from tsportfolio.errors import EmptyInput, NoMedian, ZeroScale
from tsportfolio.metrics import (
    DatasetScore,
    MetricKind,
    geometric_mean_aggregate,
    loss_function,
    mase,
    median_point,
    pinball_loss,
    relative_error,
    score,
    wql,
)


class TestPinball:
    @pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
    def test_exact(self, q):
        assert pinball_loss(7, 7, q) == 0

    def test_under_forecast(self):
        assert pinball_loss(10, 8, 0.9) == pytest.approx(0.9 * 2, abs=1e-15)

    def test_over_forecast(self):
        assert pinball_loss(10, 12, 0.1) == pytest.approx(0.9 * 2, abs=1e-15)

    @given(
        y=st.floats(-100, 100),
        a=st.floats(-100, 100),
        b=st.floats(-100, 100),
        q=st.floats(0.01, 0.99),
        lam=st.floats(0, 1),
    )
    def test_convex(self, y, a, b, q, lam):
        mix = pinball_loss(y, lam * a + (1 - lam) * b, q)
        assert mix <= lam * pinball_loss(y, a, q) + (1 - lam) * pinball_loss(y, b, q) + 1e-9


def _qf(values, levels):
    values = np.asarray(values, dtype=float)
    return QuantileForecast(tuple(str(i) for i in range(values.shape[0])), values, levels)


class TestWQL:
    def test_perfect(self):
        y = np.array([[1.0, 2.0, 3.0]])
        assert wql(_qf(np.repeat(y[:, :, None], 3, axis=2), (0.1, 0.5, 0.9)), y) == 0

    def test_hand_value(self):
        assert wql(_qf([[[8.0]]], (0.5,)), [[10.0]]) == pytest.approx(2 * (0.5 * 2) / 10)

    def test_zero_scale(self):
        with pytest.raises(ZeroScale):
            wql(_qf([[[1.0]]], (0.5,)), [[0.0]])

    def test_matches_reference(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            (t,), y, levels = random_forecasts(rng, 1, 3, 4, 3)
            assert wql(_qf(t, levels), y) == pytest.approx(wql_reference(t, y, levels), abs=1e-12)

    def test_item_order_and_scale(self):
        rng = np.random.default_rng(1)
        (t,), y, levels = random_forecasts(rng, 1, 4, 5, 3)
        base = wql(_qf(t, levels), y)
        perm = rng.permutation(4)
        assert wql(_qf(t[perm], levels), y[perm]) == pytest.approx(base, rel=1e-12)
        for c in (0.37, 3.0, 1e4):
            assert wql(_qf(c * t, levels), c * y) == pytest.approx(base, rel=1e-12)


class TestMASE:
    def test_hand_value(self):
        assert mase([2.0], [3.0], [np.array([1.0, 2.0, 3.0])], 1) == pytest.approx(1.0)

    def test_perfect(self):
        assert mase([[3.0, 4.0]], [[3.0, 4.0]], [TimeSeries("a", [1.0, 2.0, 5.0])], 1) == 0

    def test_constant_train(self):
        with pytest.raises(ZeroScale):
            mase([1.0], [2.0], [np.array([5.0, 5.0, 5.0, 5.0])], 1)

    def test_matches_reference_and_scale_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            m = int(rng.integers(1, 4))
            trains = [rng.normal(size=int(rng.integers(m + 2, 20))) for _ in range(3)]
            point, y = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
            ref = mase_reference(point, y, trains, m)
            assert mase(point, y, trains, m) == pytest.approx(ref, rel=1e-12)
            assert mase(5.5 * point, 5.5 * y, [5.5 * x for x in trains], m) == pytest.approx(ref, rel=1e-12)


class TestMedian:
    def test_verbatim(self):
        v = np.arange(6, dtype=float).reshape(1, 2, 3)
        assert np.array_equal(median_point(_qf(v, (0.1, 0.5, 0.9))), v[:, :, 1])

    def test_interpolated(self):
        assert median_point(_qf([[[2.0, 4.0]]], (0.4, 0.6)))[0, 0] == pytest.approx(3.0)

    def test_no_median(self):
        with pytest.raises(NoMedian):
            median_point(_qf([[[2.0, 4.0]]], (0.6, 0.9)))

    def test_matches_reference(self):
        rng = np.random.default_rng(4)
        v = np.sort(rng.normal(size=(2, 3, 4)), axis=2)
        levels = (0.1, 0.3, 0.8, 0.9)
        np.testing.assert_allclose(median_point(_qf(v, levels)), median_reference(v, levels), atol=1e-14)


class TestRelative:
    def test_table_row(self):
        # australian_electricity: Chroma (tiny, freq, ens.) vs Seasonal Naive
        assert relative_error(0.042, 0.084) == pytest.approx(0.5)

    def test_scores(self):
        a = DatasetScore("d", MetricKind.WQL, 0.3, 0.3)
        assert relative_error(a, a) == 1.0
        assert a.relative == 1.0

    def test_zero_baseline_clipped(self):
        assert relative_error(0.1, 0.0) == pytest.approx(0.1 / 1e-9)

    def test_mismatched(self):
        with pytest.raises(ValueError):
            relative_error(DatasetScore("a", "wql", 1, 1), DatasetScore("b", "wql", 1, 1))


class TestGeometricMean:
    def test_values(self):
        assert geometric_mean_aggregate([1, 1, 1]) == 1.0
        assert geometric_mean_aggregate([0.5, 2.0]) == pytest.approx(1.0, abs=1e-15)
        expected = math.exp((math.log(0.5) * 2 + math.log(2.0)) / 3)
        assert geometric_mean_aggregate([0.5, 0.5, 2.0]) == pytest.approx(expected)
        assert expected == pytest.approx(0.7937005259840998)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            geometric_mean_aggregate([])

    def test_self_ratio_is_one(self):
        rng = np.random.default_rng(5)
        errs = rng.uniform(0.01, 10, size=30)
        assert geometric_mean_aggregate([relative_error(e, e) for e in errs]) == 1.0

    def test_order_independent(self):
        rng = np.random.default_rng(6)
        r = rng.uniform(0.1, 3, size=50)
        assert geometric_mean_aggregate(r) == geometric_mean_aggregate(r[::-1])


def test_loss_function_bitwise_matches_score():
    rng = np.random.default_rng(7)
    (t,), y, levels = random_forecasts(rng, 1, 3, 4, 3)
    levels = (0.1, 0.5, 0.9)
    f = _qf(t, levels)
    trains = [rng.normal(size=10) for _ in range(3)]
    assert loss_function("wql", y, levels)(t) == score("wql", f, y)
    assert loss_function("mase", y, levels, trains, 2)(t) == score("mase", f, y, trains, 2)
