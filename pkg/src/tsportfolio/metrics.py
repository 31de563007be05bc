"""Forecast losses and cross-dataset aggregation.

WQL follows the convention of the Chronos benchmarks::

    WQL = 2 * sum_{i,t,q} pinball(y_it, yhat_itq, q) / (|Q| * sum_{i,t} |y_it|)

MASE scores the median forecast against the in-sample seasonal naive MAE.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from tsportfolio.core import QuantileForecast, TimeSeries
from tsportfolio.errors import EmptyInput, NoMedian, ShapeMismatch, ZeroScale

EPS = 1e-9


class MetricKind(str, enum.Enum):
    WQL = "wql"
    MASE = "mase"

    @classmethod
    def parse(cls, value: "str | MetricKind") -> "MetricKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class DatasetScore:
    dataset_id: str
    metric: MetricKind
    value: float
    baseline_value: float

    def __post_init__(self):
        if self.value < 0 or self.baseline_value < 0:
            raise ValueError("scores must be nonnegative")

    @property
    def relative(self) -> float:
        return relative_error(self.value, self.baseline_value)


def pinball_loss(y, yhat, q):
    """Quantile loss ``q*max(y-yhat, 0) + (1-q)*max(yhat-y, 0)``; broadcasts."""
    diff = np.subtract(y, yhat)
    out = np.maximum(q * diff, (q - 1.0) * diff)
    return float(out) if np.ndim(out) == 0 else out


def _wql_array(values: np.ndarray, actuals: np.ndarray, levels: np.ndarray) -> float:
    scale = np.abs(actuals).sum()
    if scale == 0:
        raise ZeroScale("sum of absolute actuals is zero; WQL is undefined")
    diff = actuals[:, :, None] - values
    loss = np.maximum(levels * diff, (levels - 1.0) * diff)
    return float(2.0 * loss.sum() / (levels.size * scale))


def wql(forecast: QuantileForecast, actuals) -> float:
    actuals = np.asarray(actuals, dtype=float)
    if actuals.shape != forecast.values.shape[:2]:
        raise ShapeMismatch(
            f"actuals shape {actuals.shape} vs forecast {forecast.values.shape[:2]}"
        )
    return _wql_array(forecast.values, actuals, np.asarray(forecast.quantile_levels))


def seasonal_naive_scale(train, m: int) -> float:
    """In-sample MAE of the one-step seasonal naive forecast, mean |x_t - x_{t-m}|."""
    x = np.asarray(train.values if isinstance(train, TimeSeries) else train, dtype=float)
    if x.size <= m:
        raise ValueError(f"training series of length {x.size} is too short for m={m}")
    return float(np.mean(np.abs(x[m:] - x[:-m])))


def _mase_array(
    point: np.ndarray, actuals: np.ndarray, scales: np.ndarray
) -> float:
    return float(np.mean(np.mean(np.abs(actuals - point), axis=1) / scales))


def mase_scales(train: Sequence, m: int) -> np.ndarray:
    scales = np.array([seasonal_naive_scale(s, m) for s in train])
    if np.any(scales == 0):
        bad = int(np.flatnonzero(scales == 0)[0])
        raise ZeroScale(f"in-sample seasonal naive MAE is zero for item {bad}")
    return scales


def mase(point_forecast, actuals, train: Sequence, m: int) -> float:
    point = np.asarray(point_forecast, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if point.ndim == 1:
        point, actuals = point[None, :], actuals[None, :]
    if point.shape != actuals.shape or len(train) != point.shape[0]:
        raise ShapeMismatch("forecast, actuals and train must agree in item count and horizon")
    return _mase_array(point, actuals, mase_scales(train, m))


def _median_weights(levels: Sequence[float]) -> tuple[int, int, float]:
    levels = list(levels)
    if 0.5 in levels:
        i = levels.index(0.5)
        return i, i, 0.0
    below = [i for i, q in enumerate(levels) if q < 0.5]
    above = [i for i, q in enumerate(levels) if q > 0.5]
    if not below or not above:
        raise NoMedian(f"cannot interpolate the median from levels {levels}")
    lo, hi = below[-1], above[0]
    return lo, hi, (0.5 - levels[lo]) / (levels[hi] - levels[lo])


def _median_array(values: np.ndarray, levels: Sequence[float]) -> np.ndarray:
    lo, hi, frac = _median_weights(levels)
    if lo == hi:
        return values[:, :, lo]
    return values[:, :, lo] + frac * (values[:, :, hi] - values[:, :, lo])


def median_point(forecast: QuantileForecast) -> np.ndarray:
    """The 0.5-level slice, interpolated linearly when 0.5 is not a level."""
    return _median_array(forecast.values, forecast.quantile_levels)


def relative_error(model, baseline) -> float:
    """Ratio of a model's error to the baseline's, clipped at ``EPS``.

    Accepts either two :class:`DatasetScore` objects or two raw values.
    """
    if isinstance(model, DatasetScore):
        if not isinstance(baseline, DatasetScore):
            raise TypeError("baseline must also be a DatasetScore")
        if (model.dataset_id, model.metric) != (baseline.dataset_id, baseline.metric):
            raise ValueError("scores refer to different datasets or metrics")
        model, baseline = model.value, baseline.value
    return max(float(model) / max(float(baseline), EPS), EPS)


def geometric_mean_aggregate(ratios: Iterable[float]) -> float:
    """``exp(mean(log r))``; inputs are sorted first so the sum is order-independent."""
    ratios = sorted(float(r) for r in ratios)
    if not ratios:
        raise EmptyInput("geometric mean of an empty list")
    if any(r <= 0 for r in ratios):
        raise ValueError("ratios must be positive")
    return math.exp(math.fsum(math.log(r) for r in ratios) / len(ratios))


def score(
    kind: MetricKind | str,
    forecast: QuantileForecast,
    actuals,
    train: Sequence | None = None,
    m: int | None = None,
) -> float:
    """Evaluate ``kind`` on a forecast; MASE needs ``train`` and ``m``."""
    kind = MetricKind.parse(kind)
    if kind is MetricKind.WQL:
        return wql(forecast, actuals)
    if train is None or m is None:
        raise ValueError("MASE requires the training series and season length")
    return mase(median_point(forecast), actuals, train, m)


def loss_function(
    kind: MetricKind | str,
    actuals,
    quantile_levels: Sequence[float],
    train: Sequence | None = None,
    m: int | None = None,
):
    """A loss ``f(values) -> float`` over raw forecast tensors with fixed actuals.

    Normalizers are computed once, which matters inside greedy selection where
    the same actuals are scored many times. Results are bitwise identical to
    :func:`wql` / :func:`mase` on the same tensor.
    """
    kind = MetricKind.parse(kind)
    actuals = np.asarray(actuals, dtype=float)
    levels = np.asarray(quantile_levels, dtype=float)
    if kind is MetricKind.WQL:
        if np.abs(actuals).sum() == 0:
            raise ZeroScale("sum of absolute actuals is zero; WQL is undefined")
        return lambda values: _wql_array(values, actuals, levels)
    if train is None or m is None:
        raise ValueError("MASE requires the training series and season length")
    scales = mase_scales(train, m)
    _median_weights(levels)
    return lambda values: _mase_array(_median_array(values, levels), actuals, scales)
