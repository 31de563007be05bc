"""Lightweight built-in forecasters.

These serve as the Seasonal Naive reference and as cheap portfolio members.
Every forecaster emits monotone quantiles without needing a correction pass.
"""

from __future__ import annotations

import abc
import math
from typing import Sequence

import numpy as np

from tsportfolio.core import QuantileForecast, TimeSeries, ForecastTask
from tsportfolio.errors import SeriesTooShort


def _values(train) -> np.ndarray:
    return np.asarray(train.values if isinstance(train, TimeSeries) else train, dtype=float)


def _item_id(train) -> str:
    return train.id if isinstance(train, TimeSeries) else "0"


def _flat(item_id: str, path: np.ndarray, levels: Sequence[float]) -> QuantileForecast:
    values = np.repeat(path[None, :, None], len(levels), axis=2)
    return QuantileForecast((item_id,), values, tuple(levels))


def seasonal_naive_path(x: np.ndarray, horizon: int, m: int) -> np.ndarray:
    if x.size < m:
        raise SeriesTooShort(f"seasonal naive needs at least m={m} observations, got {x.size}")
    n = x.size
    # yhat_{n+h} = x_{n+h-m*ceil(h/m)}, 1-based
    idx = [n - 1 + h - m * math.ceil(h / m) for h in range(1, horizon + 1)]
    return x[idx].astype(float)


def seasonal_naive(train, horizon: int, m: int, levels: Sequence[float]) -> QuantileForecast:
    """Repeat the last observed season; every quantile carries the point path."""
    return _flat(_item_id(train), seasonal_naive_path(_values(train), horizon, m), levels)


def drift(train, horizon: int, levels: Sequence[float]) -> QuantileForecast:
    """Extrapolate the straight line through the first and last observation."""
    x = _values(train)
    if x.size < 2:
        raise SeriesTooShort("drift needs at least 2 observations")
    slope = (x[-1] - x[0]) / (x.size - 1)
    path = x[-1] + slope * np.arange(1, horizon + 1)
    return _flat(_item_id(train), path, levels)


def ar_design(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Regression rows ``[1, x[t-1], ..., x[t-p]]`` and targets ``x[t]``."""
    if p < 1:
        raise ValueError("lag order must be >= 1")
    if x.size < p + 2:
        raise SeriesTooShort(f"AR({p}) needs at least {p + 2} observations, got {x.size}")
    lags = np.column_stack([x[p - k - 1 : x.size - k - 1] for k in range(p)])
    return np.column_stack([np.ones(x.size - p), lags]), x[p:]


def ar_path(x: np.ndarray, coef: np.ndarray, horizon: int) -> np.ndarray:
    """Iterate fitted AR coefficients (intercept first) ``horizon`` steps past ``x``."""
    p = coef.size - 1
    history = list(x[-p:])
    path = np.empty(horizon)
    for h in range(horizon):
        # history[-1] is lag 1
        nxt = coef[0] + sum(coef[k + 1] * history[-1 - k] for k in range(p))
        path[h] = nxt
        history.append(nxt)
    return path


def ar_quantile(train, horizon: int, p: int, levels: Sequence[float]) -> QuantileForecast:
    """Least-squares AR(p) with intercept, iterated ``horizon`` steps.

    Quantiles add the type-7 empirical quantiles of the in-sample residuals to
    the point path. A rank-deficient design (e.g. a constant series) falls back
    to the naive forecast.
    """
    x = _values(train)
    design, target = ar_design(x, p)
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < p + 1:
        return seasonal_naive(train, horizon, 1, levels)
    residuals = target - design @ coef
    path = ar_path(x, coef, horizon)
    offsets = np.quantile(residuals, levels, method="linear")
    values = path[None, :, None] + offsets[None, None, :]
    return QuantileForecast((_item_id(train),), values, tuple(levels))


class Forecaster(abc.ABC):
    """Pluggable portfolio member: ``fit`` on training series, then ``predict``."""

    name: str = "forecaster"

    def fit(self, train: Sequence[TimeSeries], task: ForecastTask) -> "Forecaster":
        self._train = list(train)
        self._task = task
        return self

    def predict(self) -> QuantileForecast:
        if not hasattr(self, "_train"):
            raise RuntimeError(f"{self.name} must be fit before predict")
        forecasts = [self._predict_one(s, self._task) for s in self._train]
        values = np.concatenate([f.values for f in forecasts])
        return QuantileForecast(
            tuple(s.id for s in self._train), values, self._task.quantile_levels
        )

    @abc.abstractmethod
    def _predict_one(self, series: TimeSeries, task: ForecastTask) -> QuantileForecast: ...

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class SeasonalNaive(Forecaster):
    """Seasonal naive with a fixed ``m``, or the task's season length when None."""

    def __init__(self, m: int | None = None):
        self.m = m
        self.name = "seasonal_naive" if m is None else f"seasonal_naive_m{m}"

    def _predict_one(self, series, task):
        m = self.m or task.season_length
        # a fixed-m member falls back to the naive repeat on series shorter than m
        if self.m is not None and len(series) < m:
            m = 1
        return seasonal_naive(series, task.horizon, m, task.quantile_levels)


class ARQuantile(Forecaster):
    def __init__(self, p: int = 1):
        self.p = p
        self.name = f"ar{p}"

    def _predict_one(self, series, task):
        return ar_quantile(series, task.horizon, self.p, task.quantile_levels)


class Drift(Forecaster):
    name = "drift"

    def _predict_one(self, series, task):
        return drift(series, task.horizon, task.quantile_levels)


BUILTINS = {
    "seasonal_naive": SeasonalNaive,
    "ar": ARQuantile,
    "drift": Drift,
}


def make_forecaster(kind: str, **params) -> Forecaster:
    try:
        cls = BUILTINS[kind]
    except KeyError:
        raise ValueError(f"unknown builtin forecaster {kind!r}; choose from {sorted(BUILTINS)}")
    return cls(**params)
