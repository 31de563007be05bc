"""Test-time forecast combination.

Model selection picks the member with the lowest validation loss. Greedy
ensemble selection repeatedly adds (with replacement) the member whose
inclusion minimizes validation loss of the equally weighted ensemble, so after
``S`` steps the weights are selection counts divided by ``S``.

Ties always go to the earliest-declared member.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from tsportfolio.core import QuantileForecast
from tsportfolio.errors import EmptyPortfolio, ShapeMismatch
from tsportfolio.metrics import EPS, MetricKind, loss_function

DEFAULT_STEPS = 100


@dataclass(frozen=True, eq=False)
class EnsembleWeights:
    member_ids: tuple[str, ...]
    weights: np.ndarray
    trace: tuple[int, ...] = ()
    steps: int = 0
    losses: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(self.member_ids),):
            raise ShapeMismatch("one weight per member expected")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError("weights must lie on the probability simplex")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "member_ids", tuple(self.member_ids))
        object.__setattr__(self, "trace", tuple(self.trace))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.member_ids, self.weights.tolist()))

    def counts(self) -> np.ndarray:
        return np.bincount(np.asarray(self.trace, dtype=int), minlength=len(self.member_ids))

    def fractions(self) -> list[Fraction]:
        """Exact greedy weights ``count / S``."""
        return [Fraction(int(c), self.steps) for c in self.counts()]

    @property
    def n_selected(self) -> int:
        return int(np.count_nonzero(self.weights))


@dataclass(frozen=True)
class SelectionResult:
    chosen_member_id: str
    validation_losses: dict[str, float]

    def as_weights(self) -> EnsembleWeights:
        ids = tuple(self.validation_losses)
        w = np.zeros(len(ids))
        idx = ids.index(self.chosen_member_id)
        w[idx] = 1.0
        return EnsembleWeights(ids, w, (idx,), 1)


def _check_members(forecasts: Mapping[str, QuantileForecast]) -> tuple[list[str], list[QuantileForecast]]:
    if not forecasts:
        raise EmptyPortfolio("no member forecasts supplied")
    ids = list(forecasts)
    fs = [forecasts[i] for i in ids]
    ref = fs[0]
    for mid, f in zip(ids[1:], fs[1:]):
        if f.values.shape != ref.values.shape or f.quantile_levels != ref.quantile_levels:
            raise ShapeMismatch(f"member {mid!r} disagrees in shape or quantile levels with {ids[0]!r}")
        if f.item_ids != ref.item_ids:
            raise ShapeMismatch(f"member {mid!r} has a different item order than {ids[0]!r}")
    return ids, fs


def _loss(forecasts, val_actuals, loss, train, m):
    if callable(loss):
        return loss
    ref = next(iter(forecasts.values()))
    return loss_function(loss, val_actuals, ref.quantile_levels, train, m)


def select_best(
    val_forecasts: Mapping[str, QuantileForecast],
    val_actuals,
    loss: MetricKind | str = MetricKind.WQL,
    *,
    train: Sequence | None = None,
    m: int | None = None,
) -> SelectionResult:
    """Pick the member with the lowest validation loss.

    ``loss`` is a metric kind, or any callable scoring a raw forecast tensor.
    """
    ids, fs = _check_members(val_forecasts)
    fn = _loss(val_forecasts, val_actuals, loss, train, m)
    losses = {mid: fn(f.values) for mid, f in zip(ids, fs)}
    best = ids[0]
    for mid in ids[1:]:
        if losses[mid] < losses[best]:
            best = mid
    return SelectionResult(best, losses)


def greedy_ensemble_selection(
    val_forecasts: Mapping[str, QuantileForecast],
    val_actuals,
    steps: int = DEFAULT_STEPS,
    loss: MetricKind | str = MetricKind.WQL,
    *,
    train: Sequence | None = None,
    m: int | None = None,
    best_iteration: bool = False,
) -> EnsembleWeights:
    """Greedy ensemble selection with replacement.

    At step ``j`` every member ``m`` is scored by the loss of
    ``(running_sum + yhat_m) / j``, where ``running_sum`` holds the forecasts
    picked so far; the minimizer (earliest on ties) is appended to the trace.
    Returns the weights after the final step. ``best_iteration=True`` instead
    returns the weights of the step with the lowest ensemble loss (earliest on
    ties), a common variant of the algorithm.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    ids, fs = _check_members(val_forecasts)
    fn = _loss(val_forecasts, val_actuals, loss, train, m)
    stack = [f.values for f in fs]
    running = np.zeros_like(stack[0])
    trace: list[int] = []
    step_losses: list[float] = []
    for j in range(1, steps + 1):
        best_idx, best_loss = 0, None
        for idx, values in enumerate(stack):
            cand = fn((running + values) / j)
            if best_loss is None or cand < best_loss:
                best_idx, best_loss = idx, cand
        running = running + stack[best_idx]
        trace.append(best_idx)
        step_losses.append(best_loss)

    n_steps = steps
    if best_iteration:
        n_steps = int(np.argmin(step_losses)) + 1
        trace = trace[:n_steps]
    counts = np.bincount(np.asarray(trace), minlength=len(ids))
    return EnsembleWeights(tuple(ids), counts / n_steps, tuple(trace), n_steps, tuple(step_losses))


def combine_forecasts(
    weights: EnsembleWeights, forecasts: Mapping[str, QuantileForecast]
) -> QuantileForecast:
    """Elementwise weighted average of member tensors, summed in member order."""
    missing = [mid for mid, w in zip(weights.member_ids, weights.weights) if w > 0 and mid not in forecasts]
    if missing:
        raise ShapeMismatch(f"no forecasts for weighted members {missing}")
    used = {mid: forecasts[mid] for mid, w in zip(weights.member_ids, weights.weights) if w > 0}
    _check_members(used)
    ref = next(iter(used.values()))
    out = np.zeros_like(ref.values)
    for mid, w in zip(weights.member_ids, weights.weights):
        if w > 0:
            out = out + w * forecasts[mid].values
    return ref.with_values(out)


def simple_average_weights(member_ids: Sequence[str] | int) -> EnsembleWeights:
    if isinstance(member_ids, int):
        member_ids = [str(i) for i in range(member_ids)]
    n = len(member_ids)
    if n < 1:
        raise EmptyPortfolio("simple average of zero members")
    return EnsembleWeights(tuple(member_ids), np.full(n, 1.0 / n), (), n)


def performance_weighted(val_losses: Mapping[str, float]) -> EnsembleWeights:
    """Weights proportional to inverse validation loss (zero losses clipped to ``EPS``)."""
    if not val_losses:
        raise EmptyPortfolio("no validation losses supplied")
    ids = list(val_losses)
    losses = np.array([val_losses[i] for i in ids], dtype=float)
    if np.any(losses < 0):
        raise ValueError("validation losses must be nonnegative")
    inv = 1.0 / np.maximum(losses, EPS)
    return EnsembleWeights(tuple(ids), inv / inv.sum(), (), len(ids))
