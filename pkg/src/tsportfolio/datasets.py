"""Benchmark manifests and long-format CSV datasets.

A dataset file is a long CSV with columns ``item_id,timestamp,target``. The
JSON manifest carries the metadata the files lack::

    {"baseline": "seasonal_naive",
     "quantile_levels": [0.1, 0.2, ..., 0.9],
     "datasets": [{"id": "m4_hourly", "file": "m4_hourly.csv",
                   "frequency": "hourly", "season_length": 24, "horizon": 48,
                   "domain": "energy", "n_windows": 1, "stride": 48}]}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from tsportfolio.core import DEFAULT_QUANTILES, Frequency, TimeSeries
from tsportfolio.errors import ManifestError, MissingValues

REQUIRED_COLUMNS = ("item_id", "timestamp", "target")


@dataclass(frozen=True)
class DatasetSpec:
    id: str
    file: str
    frequency: str
    season_length: int
    horizon: int
    domain: str = "unknown"
    n_windows: int = 1
    stride: int | None = None

    def __post_init__(self):
        if self.horizon < 1 or self.season_length < 1 or self.n_windows < 1:
            raise ManifestError(f"dataset {self.id!r}: horizon, season_length, n_windows must be positive")
        if self.stride is None:
            object.__setattr__(self, "stride", self.horizon)

    @property
    def freq(self) -> Frequency:
        return Frequency.parse(self.frequency, self.season_length)


@dataclass(frozen=True)
class BenchmarkManifest:
    datasets: tuple[DatasetSpec, ...]
    baseline: str = "seasonal_naive"
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILES
    path: str | None = field(default=None, compare=False)

    def __post_init__(self):
        ids = [d.id for d in self.datasets]
        if len(ids) != len(set(ids)):
            raise ManifestError("dataset ids must be unique")
        if not ids:
            raise ManifestError("manifest lists no datasets")


def load_manifest(path: str, *, check_files: bool = True) -> BenchmarkManifest:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    specs = []
    for d in raw.get("datasets", []):
        try:
            spec = DatasetSpec(**d)
        except TypeError as exc:
            raise ManifestError(f"bad dataset entry {d!r}: {exc}") from None
        file = spec.file if os.path.isabs(spec.file) else os.path.join(base, spec.file)
        if check_files and not os.path.exists(file):
            raise ManifestError(f"dataset {spec.id!r}: file {file} does not exist")
        specs.append(DatasetSpec(**{**d, "file": file}))
    levels = tuple(raw.get("quantile_levels", DEFAULT_QUANTILES))
    return BenchmarkManifest(tuple(specs), raw.get("baseline", "seasonal_naive"), levels, path)


def write_manifest(manifest: BenchmarkManifest, path: str) -> None:
    base = os.path.dirname(os.path.abspath(path))
    raw = {
        "baseline": manifest.baseline,
        "quantile_levels": list(manifest.quantile_levels),
        "datasets": [
            {**d.__dict__, "file": os.path.relpath(d.file, base)} for d in manifest.datasets
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(raw, fh, indent=2)
        fh.write("\n")


def load_series_csv(
    path: str, frequency: Frequency, domain: str = "unknown", *, fill_missing: bool = False
) -> list[TimeSeries]:
    """Read a long CSV into one series per item, ordered by first appearance.

    Missing targets are rejected unless ``fill_missing`` forward-fills them
    (a leading gap is back-filled from the first observation).
    """
    df = pd.read_csv(path, dtype={"item_id": str})
    missing_cols = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing_cols:
        raise ManifestError(f"{path}: missing columns {missing_cols}")
    out = []
    for item, group in df.groupby("item_id", sort=False):
        group = group.sort_values("timestamp", kind="stable")
        target = group["target"].astype(float)
        if target.isna().any():
            if not fill_missing:
                raise MissingValues(f"{path}: item {item!r} has {int(target.isna().sum())} missing values")
            target = target.ffill().bfill()
            if target.isna().any():
                raise MissingValues(f"{path}: item {item!r} has no observed values")
        out.append(
            TimeSeries(str(item), target.to_numpy(), frequency, domain, str(group["timestamp"].iloc[0]))
        )
    if not out:
        raise ManifestError(f"{path}: no rows")
    return out


def write_series_csv(series: list[TimeSeries], path: str) -> None:
    rows = []
    for s in series:
        for t, v in enumerate(s.values):
            rows.append((s.id, t, repr(float(v))))
    frame = pd.DataFrame(rows, columns=list(REQUIRED_COLUMNS))
    frame.to_csv(path, index=False)


def seasonal_benchmark(
    directory: str,
    seed: int = 0,
    *,
    season_lengths: tuple[int, ...] = (7, 12, 24),
    n_datasets: int = 6,
    n_items: int = 5,
    n_seasons: int = 12,
    noise: float = 0.1,
    baseline: str = "seasonal_naive",
) -> BenchmarkManifest:
    """Write a synthetic benchmark of strongly seasonal datasets and its manifest.

    Dataset ``k`` uses season length ``season_lengths[k % len(season_lengths)]``.
    Each item is a random positive seasonal profile repeated with small
    multiplicative noise, so only a member that uses the right season length
    forecasts it well.
    """
    os.makedirs(directory, exist_ok=True)
    labels = {7: "daily", 12: "monthly", 24: "hourly", 4: "quarterly"}
    specs = []
    for k in range(n_datasets):
        m = season_lengths[k % len(season_lengths)]
        rng = np.random.default_rng([seed, k])
        length = m * n_seasons
        horizon = m
        series = []
        for i in range(n_items):
            profile = rng.uniform(1.0, 10.0, size=m)
            level = rng.uniform(10.0, 50.0)
            values = level + np.tile(profile, n_seasons) * (1.0 + noise * rng.standard_normal(length))
            series.append(TimeSeries(f"item{i}", values))
        file = os.path.join(directory, f"seasonal_{k}.csv")
        write_series_csv(series, file)
        specs.append(
            DatasetSpec(f"seasonal_{k}", file, labels.get(m, "daily"), m, horizon, "synthetic", 1, horizon)
        )
    manifest = BenchmarkManifest(tuple(specs), baseline, DEFAULT_QUANTILES)
    write_manifest(manifest, os.path.join(directory, "manifest.json"))
    return BenchmarkManifest(tuple(specs), baseline, DEFAULT_QUANTILES, os.path.join(directory, "manifest.json"))
