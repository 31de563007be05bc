"""Build, combine and evaluate portfolios of probabilistic forecasters."""

from tsportfolio.analysis import (
    estimate_bias_variance,
    fit_scaling_law,
    generate_synthetic_noiseless,
    weight_assignment_matrix,
)
from tsportfolio.baselines import ARQuantile, Drift, Forecaster, SeasonalNaive, ar_quantile, drift, seasonal_naive
from tsportfolio.combine import (
    EnsembleWeights,
    SelectionResult,
    combine_forecasts,
    greedy_ensemble_selection,
    performance_weighted,
    select_best,
    simple_average_weights,
)
from tsportfolio.compute import PROFILES, ArchitectureProfile, flops_forward, flops_train_step, strategy_flops
from tsportfolio.core import (
    EvaluationSplit,
    ForecastTask,
    Frequency,
    QuantileForecast,
    TimeSeries,
    enforce_monotone_quantiles,
    rolling_windows,
    split_holdout,
)
from tsportfolio.metrics import (
    DatasetScore,
    MetricKind,
    geometric_mean_aggregate,
    mase,
    median_point,
    pinball_loss,
    relative_error,
    wql,
)
from tsportfolio.portfolio import (
    Portfolio,
    PortfolioMember,
    Specialization,
    filter_members,
    ingest_external_forecasts,
    write_forecast_exchange,
)

__version__ = "0.1.0"
