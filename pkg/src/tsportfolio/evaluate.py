"""Benchmark evaluation of a portfolio against a baseline.

For every dataset the selection (or ensemble weights) is fitted once, on a
validation window holding out the last ``H`` observations before the first
evaluation window, and then applied unchanged to every rolling window.
Per-dataset errors are divided by the baseline's and aggregated with a
geometric mean over the datasets that evaluated cleanly.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from tsportfolio.baselines import Forecaster, make_forecaster
from tsportfolio.combine import (
    DEFAULT_STEPS,
    EnsembleWeights,
    combine_forecasts,
    greedy_ensemble_selection,
    performance_weighted,
    select_best,
    simple_average_weights,
)
from tsportfolio.core import (
    ForecastTask,
    QuantileForecast,
    TimeSeries,
    rolling_windows,
    split_holdout,
    stack_forecasts,
)
from tsportfolio.datasets import BenchmarkManifest, DatasetSpec, load_series_csv
from tsportfolio.errors import CoverageError, ManifestError
from tsportfolio.metrics import MetricKind, geometric_mean_aggregate, relative_error, score
from tsportfolio.portfolio import (
    BuiltinSource,
    ForecastBundle,
    Portfolio,
    read_forecast_exchange,
)

logger = logging.getLogger(__name__)

COMBINERS = ("best", "greedy", "simple", "perf_weighted")
VALIDATION_WINDOW = "val"
AGGREGATE_ROW = "geometric_mean"
LEADERBOARD_COLUMNS = ("dataset", "model", "wql", "mase", "relative_wql", "relative_mase", "status")
WEIGHT_COLUMNS = ("task_id", "group", "member_id", "weight")
PARALLELISM_ENV = "TSPORTFOLIO_JOBS"


def default_parallelism() -> int:
    try:
        return max(1, int(os.environ.get(PARALLELISM_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RunConfig:
    portfolio: Portfolio
    combiner: str = "greedy"
    steps: int = DEFAULT_STEPS
    metric: MetricKind = MetricKind.WQL
    seed: int = 0
    parallelism: int = field(default_factory=default_parallelism)
    group_by: str = "frequency"
    fill_missing: bool = False
    best_iteration: bool = False

    def __post_init__(self):
        if self.combiner not in COMBINERS:
            raise ValueError(f"combiner must be one of {COMBINERS}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.group_by not in ("frequency", "domain"):
            raise ValueError("group_by must be 'frequency' or 'domain'")
        object.__setattr__(self, "metric", MetricKind.parse(self.metric))

    @property
    def combined_name(self) -> str:
        if self.combiner == "greedy":
            return f"portfolio[greedy:{self.steps}]"
        return f"portfolio[{self.combiner}]"


@dataclass
class DatasetResult:
    dataset_id: str
    group: str
    scores: dict[str, tuple[float, float]] = field(default_factory=dict)
    baseline: tuple[float, float] | None = None
    weights: EnsembleWeights | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def parse_builtin(text: str) -> BuiltinSource:
    """``"seasonal_naive"`` or ``"seasonal_naive:m=7"`` / ``"ar:p=2"``."""
    kind, _, rest = text.partition(":")
    params = []
    for part in filter(None, rest.split(",")):
        key, _, value = part.partition("=")
        params.append((key, int(value)))
    return BuiltinSource(kind, tuple(sorted(params)))


def _external_forecast(
    bundle: ForecastBundle, member_id: str, dataset_id: str, window: str, train, task
) -> QuantileForecast:
    try:
        f = bundle[(dataset_id, window)]
    except KeyError:
        raise CoverageError(
            f"member {member_id!r} has no forecasts for task {dataset_id!r} window {window!r}"
        ) from None
    if f.horizon != task.horizon or f.quantile_levels != task.quantile_levels:
        raise CoverageError(
            f"member {member_id!r}, task {dataset_id!r} window {window!r}: forecast shape "
            f"(H={f.horizon}, Q={f.quantile_levels}) does not match the task"
        )
    try:
        return f.reindex([s.id for s in train])
    except KeyError as exc:
        raise CoverageError(
            f"member {member_id!r}, task {dataset_id!r} window {window!r}: missing item {exc}"
        ) from None


class _MemberRunner:
    """Produces forecasts for each member on a given set of training prefixes."""

    def __init__(self, portfolio: Portfolio, externals: Mapping[str, ForecastBundle]):
        self.portfolio = portfolio
        self.externals = externals

    def forecast(self, member_id, forecaster: Forecaster | None, train, task, dataset_id, window):
        if forecaster is None:
            return _external_forecast(self.externals[member_id], member_id, dataset_id, window, train, task)
        return forecaster.fit(train, task).predict()

    def all(self, forecasters, train, task, dataset_id, window) -> dict[str, QuantileForecast]:
        return {
            mid: self.forecast(mid, fc, train, task, dataset_id, window)
            for mid, fc in forecasters.items()
        }


def _fit_weights(config: RunConfig, val: dict[str, QuantileForecast], actuals, train, m) -> EnsembleWeights:
    kwargs = dict(train=train, m=m)
    if config.combiner == "greedy":
        return greedy_ensemble_selection(
            val, actuals, config.steps, config.metric, best_iteration=config.best_iteration, **kwargs
        )
    if config.combiner == "simple":
        return simple_average_weights(list(val))
    sel = select_best(val, actuals, config.metric, **kwargs)
    if config.combiner == "best":
        return sel.as_weights()
    return performance_weighted(sel.validation_losses)


def _both_scores(forecast: QuantileForecast, actuals, train, m) -> tuple[float, float]:
    return (
        score(MetricKind.WQL, forecast, actuals),
        score(MetricKind.MASE, forecast, actuals, train, m),
    )


def evaluate_dataset(
    spec: DatasetSpec,
    manifest: BenchmarkManifest,
    config: RunConfig,
    externals: Mapping[str, ForecastBundle],
) -> DatasetResult:
    group = spec.frequency if config.group_by == "frequency" else spec.domain
    result = DatasetResult(spec.id, group)
    try:
        _evaluate_into(result, spec, manifest, config, externals)
    except Exception as exc:  # surfaced per dataset, the run continues
        logger.error("dataset %s failed: %s", spec.id, exc)
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _evaluate_into(result, spec, manifest, config, externals):
    m = spec.season_length
    series = load_series_csv(spec.file, spec.freq, spec.domain, fill_missing=config.fill_missing)
    task = ForecastTask(spec.horizon, manifest.quantile_levels, m)
    windows = [rolling_windows(s, spec.horizon, spec.n_windows, spec.stride, season_length=m) for s in series]
    selection = [split_holdout(w[0].train, spec.horizon, season_length=m) for w in windows]

    portfolio = config.portfolio
    runner = _MemberRunner(portfolio, externals)
    forecasters = {
        mem.id: None if mem.is_external else mem.source.build() for mem in portfolio.members
    }

    val_train = [s.train for s in selection]
    val_actuals = np.stack([s.validation_actuals for s in selection])
    val = runner.all(forecasters, val_train, task, spec.id, VALIDATION_WINDOW)
    weights = _fit_weights(config, val, val_actuals, val_train, m)
    result.weights = weights

    if manifest.baseline in portfolio:
        baseline_fc = None
    else:
        baseline_fc = parse_builtin(manifest.baseline).build()

    per_model: dict[str, list[QuantileForecast]] = {mid: [] for mid in forecasters}
    per_model[config.combined_name] = []
    baseline_windows: list[QuantileForecast] = []
    test_train: list[TimeSeries] = []
    test_actuals = []
    for k in range(spec.n_windows):
        train = [w[k].train for w in windows]
        test_train.extend(train)
        test_actuals.append(np.stack([w[k].validation_actuals for w in windows]))
        fcs = runner.all(forecasters, train, task, spec.id, str(k))
        for mid, f in fcs.items():
            per_model[mid].append(_tag_window(f, k))
        per_model[config.combined_name].append(_tag_window(combine_forecasts(weights, fcs), k))
        if baseline_fc is not None:
            baseline_windows.append(_tag_window(baseline_fc.fit(train, task).predict(), k))

    actuals = np.concatenate(test_actuals)
    for mid, fs in per_model.items():
        result.scores[mid] = _both_scores(stack_forecasts(fs), actuals, test_train, m)
    if baseline_fc is None:
        result.baseline = result.scores[manifest.baseline]
    else:
        result.baseline = _both_scores(stack_forecasts(baseline_windows), actuals, test_train, m)


def _tag_window(f: QuantileForecast, k: int) -> QuantileForecast:
    return QuantileForecast(tuple(f"{i}@{k}" for i in f.item_ids), f.values, f.quantile_levels)


def load_externals(portfolio: Portfolio, quantile_levels) -> dict[str, ForecastBundle]:
    out = {}
    for mem in portfolio.members:
        if mem.is_external:
            out[mem.id] = read_forecast_exchange(mem.source.path, quantile_levels)
    return out


@dataclass
class Leaderboard:
    results: list[DatasetResult]
    model_names: list[str]
    baseline_name: str
    rows: list[dict] = field(default_factory=list)

    @property
    def failed(self) -> list[DatasetResult]:
        return [r for r in self.results if not r.ok]

    @property
    def clean(self) -> bool:
        return not self.failed

    def aggregate(self, model: str, metric: str = "relative_wql") -> float:
        for row in self.rows:
            if row["dataset"] == AGGREGATE_ROW and row["model"] == model:
                return row[metric]
        raise KeyError(model)

    def weight_rows(self) -> list[dict]:
        rows = []
        for r in self.results:
            if r.ok and r.weights is not None:
                for mid, w in zip(r.weights.member_ids, r.weights.weights.tolist()):
                    rows.append({"task_id": r.dataset_id, "group": r.group, "member_id": mid, "weight": w})
        return rows


def build_leaderboard(results: list[DatasetResult], config: RunConfig, baseline: str) -> Leaderboard:
    models = [*config.portfolio.ids, config.combined_name]
    if baseline not in config.portfolio:
        models.append(baseline)
    board = Leaderboard(results, models, baseline)
    rel: dict[str, tuple[list[float], list[float]]] = {mdl: ([], []) for mdl in models}
    for r in results:
        if not r.ok:
            board.rows.append(_row(r.dataset_id, "", status=f"failed: {r.error}"))
            continue
        b_wql, b_mase = r.baseline
        for mdl in models:
            wql_v, mase_v = r.baseline if mdl == baseline and mdl not in r.scores else r.scores[mdl]
            rw, rm = relative_error(wql_v, b_wql), relative_error(mase_v, b_mase)
            rel[mdl][0].append(rw)
            rel[mdl][1].append(rm)
            board.rows.append(_row(r.dataset_id, mdl, wql_v, mase_v, rw, rm))
    n_ok = sum(r.ok for r in results)
    for mdl in models:
        if n_ok:
            board.rows.append(
                _row(
                    AGGREGATE_ROW,
                    mdl,
                    relative_wql=geometric_mean_aggregate(rel[mdl][0]),
                    relative_mase=geometric_mean_aggregate(rel[mdl][1]),
                    status=f"n={n_ok}",
                )
            )
    if board.failed:
        names = " ".join(r.dataset_id for r in board.failed)
        board.rows.append(_row("note", "", status=f"excluded from aggregate (failed): {names}"))
    return board


def _row(dataset, model, wql=None, mase=None, relative_wql=None, relative_mase=None, status="ok"):
    return {
        "dataset": dataset,
        "model": model,
        "wql": wql,
        "mase": mase,
        "relative_wql": relative_wql,
        "relative_mase": relative_mase,
        "status": status,
    }


def evaluate_benchmark(manifest: BenchmarkManifest, config: RunConfig) -> Leaderboard:
    """Evaluate every dataset in the manifest; datasets run on a bounded thread pool."""
    if manifest.baseline not in config.portfolio:
        try:
            parse_builtin(manifest.baseline).build()
        except ValueError as exc:
            raise ManifestError(f"baseline {manifest.baseline!r} is neither a member nor a builtin: {exc}")
    externals = load_externals(config.portfolio, manifest.quantile_levels)
    if config.parallelism == 1:
        results = [evaluate_dataset(d, manifest, config, externals) for d in manifest.datasets]
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(
                pool.map(lambda d: evaluate_dataset(d, manifest, config, externals), manifest.datasets)
            )
    return build_leaderboard(results, config, manifest.baseline)
