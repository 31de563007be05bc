"""Scaling-law fits, bias-variance estimates and ensemble credit assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from tsportfolio.baselines import ar_design, ar_path
from tsportfolio.combine import EnsembleWeights
from tsportfolio.core import Frequency, TimeSeries
from tsportfolio.errors import (
    DegenerateDesign,
    EmptyInput,
    InconsistentMembers,
    ShapeMismatch,
    TooFewRealizations,
)


@dataclass(frozen=True)
class ScalingFit:
    alpha: float
    intercept: float
    p_value: float
    r_squared: float
    n_points: int
    stderr: float = float("nan")

    def significant(self, level: float = 0.05) -> bool:
        return self.p_value < level

    def predict(self, scale):
        return np.exp(self.intercept) * np.asarray(scale, dtype=float) ** self.alpha


def fit_scaling_law(points: Sequence[tuple[float, float]]) -> ScalingFit:
    """OLS fit of ``log(error) = intercept + alpha * log(scale)``.

    The p-value is the two-sided t-test of ``alpha = 0`` with ``n - 2`` degrees
    of freedom, evaluated with the exact Student-t CDF.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (scale, error) pairs")
    n = pts.shape[0]
    if n < 3:
        raise ValueError("at least 3 points are needed for a p-value")
    if np.any(pts <= 0):
        raise ValueError("scales and errors must be positive")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise DegenerateDesign("all scales are equal")
    yc = y - y.mean()
    alpha = float(xc @ yc) / sxx
    intercept = float(y.mean() - alpha * x.mean())
    resid = y - (intercept + alpha * x)
    sse = float(resid @ resid)
    sst = float(yc @ yc)
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    dof = n - 2
    stderr = math.sqrt(sse / dof / sxx)
    if stderr == 0:
        p = 0.0 if alpha != 0 else 1.0
    else:
        t = abs(alpha) / stderr
        p = float(2.0 * special.stdtr(dof, -t))
    return ScalingFit(alpha, intercept, min(max(p, 0.0), 1.0), r2, n, stderr)


@dataclass(frozen=True, eq=False)
class BiasVarianceReport:
    bias: np.ndarray
    variance: np.ndarray
    n_realizations: int
    aggregate_bias: float = field(init=False)
    aggregate_variance: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "aggregate_bias", float(np.mean(self.bias)))
        object.__setattr__(self, "aggregate_variance", float(np.mean(self.variance)))

    @property
    def per_input(self) -> list[tuple[float, float]]:
        return list(zip(self.bias.tolist(), self.variance.tolist()))


def estimate_bias_variance(realization_forecasts, truths) -> BiasVarianceReport:
    """Per-input squared bias of the mean forecast and spread across realizations.

    ``realization_forecasts`` has shape ``(M, n_inputs)`` (or ``(M, ...)``,
    flattened over trailing axes) and ``truths`` shape ``(n_inputs,)``.
    """
    f = np.asarray(realization_forecasts, dtype=float)
    y = np.asarray(truths, dtype=float).ravel()
    if f.ndim < 2:
        raise ShapeMismatch("realization forecasts need a leading realization axis")
    f = f.reshape(f.shape[0], -1)
    if f.shape[0] < 2:
        raise TooFewRealizations(f"need at least 2 realizations, got {f.shape[0]}")
    if f.shape[1] != y.size:
        raise ShapeMismatch(f"{f.shape[1]} forecast inputs vs {y.size} truths")
    mean = f.mean(axis=0)
    bias = (mean - y) ** 2
    variance = np.mean((f - mean) ** 2, axis=0)
    return BiasVarianceReport(bias, variance, f.shape[0])


@dataclass(frozen=True)
class SyntheticParams:
    periods: tuple[float, ...]
    amplitudes: tuple[float, ...]
    phases: tuple[float, ...]
    slope: float
    constant: float

    def evaluate(self, t) -> np.ndarray:
        """Noise-free signal at 1-based time indices ``t``."""
        t = np.asarray(t, dtype=float)
        out = self.constant + self.slope * t
        for period, amp, phase in zip(self.periods, self.amplitudes, self.phases):
            out = out + amp * np.sin(2.0 * np.pi * t / period + phase)
        return out


@dataclass(frozen=True, eq=False)
class SyntheticSeries:
    series: TimeSeries
    continuation: np.ndarray
    params: SyntheticParams


def _draw_params(rng, length, n_components, amplitude_range, trend_scale, constant_range):
    periods = rng.uniform(4.0, length / 4.0, size=n_components)
    lo, hi = amplitude_range
    if hi <= 0:
        amps = np.zeros(n_components)
    elif lo <= 0 or lo == hi:
        amps = rng.uniform(lo, hi, size=n_components)
    else:
        amps = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n_components))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_components)
    slope = rng.uniform(-0.1, 0.1) * trend_scale
    constant = rng.uniform(*constant_range)
    return SyntheticParams(
        tuple(periods.tolist()), tuple(amps.tolist()), tuple(phases.tolist()), float(slope), float(constant)
    )


def generate_synthetic_noiseless(
    n_series: int,
    length: int,
    horizon: int,
    seed: int,
    *,
    n_components: int = 3,
    amplitude_range: tuple[float, float] = (0.5, 2.0),
    trend_scale: float = 1.0,
    constant_range: tuple[float, float] = (-5.0, 5.0),
) -> list[SyntheticSeries]:
    """Noise-free sums of sinusoids plus a linear trend and a constant.

    Each series draws its parameters from its own generator seeded by
    ``(seed, index)``, so output does not depend on generation order.
    Periods are uniform in ``[4, length / 4]``, amplitudes log-uniform in
    ``amplitude_range``, slopes uniform in ``[-0.1, 0.1] * trend_scale`` and
    constants uniform in ``constant_range``.
    """
    if length < 16:
        raise ValueError("length must be at least 16 so periods in [4, length/4] exist")
    out = []
    t_obs = np.arange(1, length + 1)
    t_future = np.arange(length + 1, length + horizon + 1)
    for i in range(n_series):
        rng = np.random.default_rng([seed, i])
        params = _draw_params(rng, length, n_components, amplitude_range, trend_scale, constant_range)
        series = TimeSeries(f"synth_{i}", params.evaluate(t_obs), Frequency("daily"), "synthetic")
        out.append(SyntheticSeries(series, params.evaluate(t_future), params))
    return out


def ar_realizations(
    series: Sequence[TimeSeries],
    horizon: int,
    n_realizations: int,
    seed: int,
    *,
    p: int = 1,
    subsample: float = 0.8,
) -> np.ndarray:
    """Point forecasts from AR(p) members fit on random subsets of the lag rows.

    A low-order AR model cannot represent a mixture of periodic components, so
    these realizations are deliberately underfit; the row subsample plays the
    role of the training seed. Returns shape ``(n_realizations, n_series, horizon)``.
    """
    if not 0 < subsample <= 1:
        raise ValueError("subsample must be in (0, 1]")
    out = np.empty((n_realizations, len(series), horizon))
    for r in range(n_realizations):
        rng = np.random.default_rng([seed, r])
        for i, s in enumerate(series):
            design, target = ar_design(s.values, p)
            k = max(p + 1, int(round(subsample * target.size)))
            rows = np.sort(rng.choice(target.size, size=min(k, target.size), replace=False))
            coef, _, rank, _ = np.linalg.lstsq(design[rows], target[rows], rcond=None)
            if rank < p + 1:
                out[r, i] = s.values[-1]
            else:
                out[r, i] = ar_path(s.values, coef, horizon)
    return out


BY_TASK_GROUP = "by_task_group"
BY_SPECIALIZATION = "by_specialization"


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    row_labels: tuple[str, ...]
    column_labels: tuple[str, ...]
    values: np.ndarray

    def to_rows(self) -> list[list]:
        return [[label, *row] for label, row in zip(self.row_labels, self.values.tolist())]


def weight_assignment_matrix(
    runs: Sequence[tuple[str, str, EnsembleWeights]], grouping: str = BY_TASK_GROUP
) -> WeightMatrix:
    """Average ensemble weights of each member across tasks, per row, normalized per row.

    ``by_task_group`` yields one row per group tag (tasks sharing a frequency or
    domain). ``by_specialization`` keeps one row per task, ordered by group tag
    and labelled ``group/task``. Rows are listed in sorted label order.
    """
    if not runs:
        raise EmptyInput("no ensemble runs supplied")
    members = runs[0][2].member_ids
    for task, _, w in runs:
        if w.member_ids != members:
            raise InconsistentMembers(
                f"task {task!r} has members {list(w.member_ids)}, expected {list(members)}"
            )
    if grouping == BY_TASK_GROUP:
        keyed = [(group, w) for _, group, w in runs]
    elif grouping == BY_SPECIALIZATION:
        keyed = [(f"{group}/{task}", w) for task, group, w in runs]
    else:
        raise ValueError(f"unknown grouping {grouping!r}")
    labels = sorted({k for k, _ in keyed})
    values = np.zeros((len(labels), len(members)))
    for r, label in enumerate(labels):
        ws = np.array([w.weights for k, w in keyed if k == label])
        row = ws.mean(axis=0)
        total = row.sum()
        values[r] = row / total if total > 0 else row
    return WeightMatrix(tuple(labels), tuple(members), values)
