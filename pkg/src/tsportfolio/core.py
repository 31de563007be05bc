"""Domain types for series, forecast tasks and quantile forecast tensors.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be shared freely between worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tsportfolio.errors import SeriesTooShort, ShapeMismatch

DEFAULT_QUANTILES: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(1, 10))

# Default season length per frequency label. Sub-hourly is derived from the
# sampling interval in minutes.
SEASON_LENGTHS: dict[str, int] = {
    "yearly": 1,
    "quarterly": 4,
    "monthly": 12,
    "weekly": 1,
    "daily": 7,
    "hourly": 24,
}

FREQUENCY_LABELS = (*SEASON_LENGTHS, "sub-hourly")


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def default_season_length(
    label: str, minutes: int | None = None, context_length: int | None = None
) -> int:
    """Season length for a frequency label.

    Sub-hourly data with a ``minutes`` sampling interval gets one day's worth of
    steps, ``round(1440 / minutes)``, capped at ``context_length`` when given.
    """
    if label == "sub-hourly":
        if minutes is None or minutes <= 0:
            raise ValueError("sub-hourly frequency requires a positive 'minutes' interval")
        m = max(1, round(1440 / minutes))
        if context_length is not None:
            m = max(1, min(m, context_length))
        return m
    try:
        return SEASON_LENGTHS[label]
    except KeyError:
        raise ValueError(f"unknown frequency label {label!r}") from None


@dataclass(frozen=True)
class Frequency:
    label: str
    season_length: int = 0
    minutes: int | None = None

    def __post_init__(self):
        if self.label not in FREQUENCY_LABELS:
            raise ValueError(f"unknown frequency label {self.label!r}")
        if self.season_length == 0:
            object.__setattr__(
                self, "season_length", default_season_length(self.label, self.minutes)
            )
        if self.season_length < 1:
            raise ValueError("season_length must be >= 1")

    @classmethod
    def parse(cls, text: str, season_length: int | None = None) -> "Frequency":
        """Parse ``"hourly"`` or ``"sub-hourly:15"`` style labels."""
        label, _, minutes = text.partition(":")
        return cls(label, season_length or 0, int(minutes) if minutes else None)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    id: str
    values: np.ndarray
    frequency: Frequency = field(default_factory=lambda: Frequency("daily"))
    domain: str = "unknown"
    start: str | None = None

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.ndim != 1 or values.size < 1:
            raise ValueError(f"series {self.id!r} must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"series {self.id!r} contains NaN or infinite values")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def season_length(self) -> int:
        return self.frequency.season_length

    def head(self, n: int) -> "TimeSeries":
        """The first ``n`` observations as a new series with the same metadata."""
        return TimeSeries(self.id, self.values[:n], self.frequency, self.domain, self.start)


@dataclass(frozen=True)
class ForecastTask:
    horizon: int
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILES
    season_length: int = 1
    context_limit: int | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.season_length < 1:
            raise ValueError("season_length must be positive")
        levels = tuple(float(q) for q in self.quantile_levels)
        if not levels or any(not 0.0 < q < 1.0 for q in levels):
            raise ValueError("quantile levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("quantile levels must be strictly increasing")
        object.__setattr__(self, "quantile_levels", levels)


@dataclass(frozen=True, eq=False)
class QuantileForecast:
    """Predictions indexed by (item, horizon step, quantile level)."""

    item_ids: tuple[str, ...]
    values: np.ndarray
    quantile_levels: tuple[float, ...]

    def __post_init__(self):
        values = _frozen_array(self.values)
        item_ids = tuple(str(i) for i in self.item_ids)
        levels = tuple(float(q) for q in self.quantile_levels)
        if values.ndim != 3:
            raise ShapeMismatch(f"expected a 3-d tensor, got shape {values.shape}")
        if values.shape[0] != len(item_ids) or values.shape[2] != len(levels):
            raise ShapeMismatch(
                f"tensor shape {values.shape} does not match "
                f"{len(item_ids)} items x {len(levels)} quantile levels"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "item_ids", item_ids)
        object.__setattr__(self, "quantile_levels", levels)

    @property
    def horizon(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values, axis=2) >= 0))

    def with_values(self, values: np.ndarray) -> "QuantileForecast":
        return QuantileForecast(self.item_ids, values, self.quantile_levels)

    def reindex(self, item_ids: Sequence[str]) -> "QuantileForecast":
        """Reorder (or subset) items; raises KeyError for unknown ids."""
        pos = {item: i for i, item in enumerate(self.item_ids)}
        idx = [pos[str(i)] for i in item_ids]
        return QuantileForecast(tuple(item_ids), self.values[idx], self.quantile_levels)

    def __eq__(self, other):
        if not isinstance(other, QuantileForecast):
            return NotImplemented
        return (
            self.item_ids == other.item_ids
            and self.quantile_levels == other.quantile_levels
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def stack_forecasts(forecasts: Sequence[QuantileForecast]) -> QuantileForecast:
    """Concatenate forecasts along the item axis."""
    if not forecasts:
        raise ValueError("nothing to stack")
    levels = forecasts[0].quantile_levels
    for f in forecasts[1:]:
        if f.quantile_levels != levels or f.horizon != forecasts[0].horizon:
            raise ShapeMismatch("cannot stack forecasts with different horizons or levels")
    items = tuple(i for f in forecasts for i in f.item_ids)
    return QuantileForecast(items, np.concatenate([f.values for f in forecasts]), levels)


@dataclass(frozen=True, eq=False)
class EvaluationSplit:
    train: TimeSeries
    validation_actuals: np.ndarray
    test_actuals: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "validation_actuals", _frozen_array(self.validation_actuals))
        if self.test_actuals is not None:
            object.__setattr__(self, "test_actuals", _frozen_array(self.test_actuals))

    @property
    def horizon(self) -> int:
        return self.validation_actuals.size

    def reassemble(self) -> np.ndarray:
        parts = [self.train.values, self.validation_actuals]
        if self.test_actuals is not None:
            parts.append(self.test_actuals)
        return np.concatenate(parts)


def split_holdout(
    series: TimeSeries, horizon: int, *, with_test: bool = False, season_length: int | None = None
) -> EvaluationSplit:
    """Hold out the last ``horizon`` observations as validation.

    With ``with_test`` the last ``horizon`` values become the test window and
    the ``horizon`` values before them the validation window.
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    m = season_length or series.season_length
    n_held = 2 * horizon if with_test else horizon
    need = n_held + m + 1
    if len(series) < need:
        raise SeriesTooShort(
            f"series {series.id!r} has {len(series)} values, needs at least {need}"
        )
    x = series.values
    cut = len(x) - n_held
    validation = x[cut : cut + horizon]
    test = x[cut + horizon :] if with_test else None
    return EvaluationSplit(series.head(cut), validation, test)


def rolling_windows(
    series: TimeSeries,
    horizon: int,
    n_windows: int,
    stride: int,
    *,
    season_length: int | None = None,
) -> list[EvaluationSplit]:
    """Chronologically ordered rolling evaluation windows.

    Window ``k`` evaluates positions
    ``[L - H - (n_windows - 1 - k) * stride, ... + H)``; its ``train`` is the
    full prefix before that position and the window values are stored as
    ``validation_actuals``. Window 0 is the selection window.
    """
    if horizon < 1 or n_windows < 1 or stride < 1:
        raise ValueError("horizon, n_windows and stride must be positive")
    m = season_length or series.season_length
    n = len(series)
    need = horizon + (n_windows - 1) * stride + m + 1
    if n < need:
        raise SeriesTooShort(f"series {series.id!r} has {n} values, needs at least {need}")
    splits = []
    for k in range(n_windows):
        start = n - horizon - (n_windows - 1 - k) * stride
        splits.append(
            EvaluationSplit(series.head(start), series.values[start : start + horizon])
        )
    return splits


def enforce_monotone_quantiles(forecast: QuantileForecast) -> QuantileForecast:
    """Fix crossing quantiles with a running maximum across levels."""
    return forecast.with_values(np.maximum.accumulate(forecast.values, axis=2))


def count_crossings(forecast: QuantileForecast) -> int:
    """Number of (item, step) quantile vectors that are not non-decreasing."""
    return int(np.any(np.diff(forecast.values, axis=2) < 0, axis=2).sum())
