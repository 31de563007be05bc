import json
import os

import numpy as np
import pytest

from conftest import SPECIALISTS, builtin, write_portfolio
from tsportfolio.core import ForecastTask, rolling_windows, split_holdout
from tsportfolio.baselines import SeasonalNaive
from tsportfolio.datasets import DatasetSpec, load_manifest, load_series_csv, write_series_csv
from tsportfolio.core import TimeSeries, Frequency
from tsportfolio.errors import ManifestError, MissingValues
from tsportfolio.evaluate import AGGREGATE_ROW, RunConfig, evaluate_benchmark, parse_builtin
from tsportfolio.metrics import geometric_mean_aggregate
from tsportfolio.portfolio import load_portfolio, write_forecast_exchange


def _set_baseline(manifest_path, baseline, **changes):
    raw = json.loads(open(manifest_path).read())
    raw["baseline"] = baseline
    for d in raw["datasets"]:
        d.update(changes)
    with open(manifest_path, "w") as fh:
        json.dump(raw, fh)
    return load_manifest(manifest_path)


def test_self_ratio_is_exactly_one(bench, tmp_path):
    manifest = _set_baseline(bench, "seasonal_naive")
    p = load_portfolio(write_portfolio(tmp_path / "p.json", [builtin("seasonal_naive")]))
    board = evaluate_benchmark(manifest, RunConfig(p, combiner="best"))
    assert board.aggregate("portfolio[best]") == 1.0
    assert board.aggregate("seasonal_naive") == 1.0


def test_dominant_member_is_selected(bench, tmp_path):
    manifest = _set_baseline(bench, "seasonal_naive")
    p = load_portfolio(write_portfolio(tmp_path / "p.json", [builtin("A"), builtin("B", "drift")]))
    board = evaluate_benchmark(manifest, RunConfig(p, combiner="best"))
    for r in board.results:
        assert r.scores["A"][0] < r.scores["B"][0]
        assert r.weights.as_dict() == {"A": 1.0, "B": 0.0}
    assert board.aggregate("portfolio[best]") == board.aggregate("A")


def test_aggregates_recomputable_from_rows(bench, specialist_portfolio):
    manifest = _set_baseline(bench, "sn1")
    board = evaluate_benchmark(manifest, RunConfig(load_portfolio(specialist_portfolio), combiner="greedy", steps=10))
    for model in board.model_names:
        rows = [r for r in board.rows if r["model"] == model and r["dataset"] != AGGREGATE_ROW]
        assert len(rows) == 6
        assert geometric_mean_aggregate([float(repr(r["relative_wql"])) for r in rows]) == board.aggregate(model)
        for r in rows:
            base = [b for b in board.rows if b["dataset"] == r["dataset"] and b["model"] == "sn1"][0]
            assert r["relative_wql"] == r["wql"] / base["wql"]


def test_failed_dataset_is_excluded(bench, tmp_path):
    manifest = load_manifest(bench)
    short = tmp_path / "short.csv"
    write_series_csv([TimeSeries("a", [1.0, 2.0, 3.0])], str(short))
    bad = DatasetSpec("too_short", str(short), "daily", 7, 7)
    manifest = type(manifest)((*manifest.datasets, bad), "seasonal_naive", manifest.quantile_levels)
    p = load_portfolio(write_portfolio(tmp_path / "p.json", [builtin("seasonal_naive")]))
    board = evaluate_benchmark(manifest, RunConfig(p, combiner="best"))
    assert not board.clean
    assert [r.dataset_id for r in board.failed] == ["too_short"]
    assert "SeriesTooShort" in board.failed[0].error
    agg = [r for r in board.rows if r["dataset"] == AGGREGATE_ROW]
    assert all(r["status"] == "n=6" for r in agg)
    assert board.rows[-1]["dataset"] == "note"


def test_external_member_matches_builtin(bench, tmp_path):
    manifest = _set_baseline(bench, "sn1", n_windows=2)
    forecasts = {}
    for d in manifest.datasets:
        series = load_series_csv(d.file, d.freq, d.domain)
        task = ForecastTask(d.horizon, manifest.quantile_levels, d.season_length)
        windows = [rolling_windows(s, d.horizon, 2, d.stride, season_length=d.season_length) for s in series]
        val = [split_holdout(w[0].train, d.horizon, season_length=d.season_length).train for w in windows]
        forecasts[(d.id, "val")] = SeasonalNaive().fit(val, task).predict()
        for k in range(2):
            forecasts[(d.id, str(k))] = SeasonalNaive().fit([w[k].train for w in windows], task).predict()
    path = tmp_path / "ext.csv"
    write_forecast_exchange(forecasts, str(path))
    members = [
        builtin("sn1", m=1),
        builtin("matched"),
        {"id": "ext", "specialization": "generalist", "source": {"external": str(path)}},
    ]
    p = load_portfolio(write_portfolio(tmp_path / "p.json", members))
    board = evaluate_benchmark(manifest, RunConfig(p, combiner="greedy", steps=5))
    assert board.clean
    for r in board.results:
        assert r.scores["ext"] == r.scores["matched"]
    assert board.aggregate("ext") == board.aggregate("matched") < 0.9


def test_external_member_missing_window_fails_dataset(bench, tmp_path):
    manifest = _set_baseline(bench, "sn1")
    path = tmp_path / "ext.csv"
    write_forecast_exchange({}, str(path))
    members = [builtin("sn1", m=1), {"id": "ext", "source": {"external": str(path)}}]
    board = evaluate_benchmark(manifest, RunConfig(load_portfolio(write_portfolio(tmp_path / "p.json", members))))
    assert len(board.failed) == 6
    assert "CoverageError" in board.failed[0].error


def test_rolling_windows_use_fixed_selection(bench, specialist_portfolio):
    manifest = _set_baseline(bench, "sn1", n_windows=3)
    board = evaluate_benchmark(manifest, RunConfig(load_portfolio(specialist_portfolio), combiner="best"))
    assert board.clean
    for r in board.results:
        chosen = r.weights.member_ids[int(np.argmax(r.weights.weights))]
        assert r.scores["portfolio[best]"] == r.scores[chosen]


def test_unknown_baseline(bench, specialist_portfolio):
    manifest = _set_baseline(bench, "oracle")
    with pytest.raises(ManifestError):
        evaluate_benchmark(manifest, RunConfig(load_portfolio(specialist_portfolio)))


def test_parse_builtin():
    assert parse_builtin("seasonal_naive:m=7").build().m == 7
    assert parse_builtin("ar:p=3").build().p == 3


def test_missing_values(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("item_id,timestamp,target\na,0,1\na,1,\na,2,3\n")
    with pytest.raises(MissingValues):
        load_series_csv(str(path), Frequency("daily"))
    (s,) = load_series_csv(str(path), Frequency("daily"), fill_missing=True)
    assert s.values.tolist() == [1.0, 1.0, 3.0]


def test_manifest_missing_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"datasets": [{"id": "x", "file": "nope.csv", "frequency": "daily",
                                              "season_length": 7, "horizon": 7}]}))
    with pytest.raises(ManifestError):
        load_manifest(str(path))
    assert os.path.basename(load_manifest(str(path), check_files=False).datasets[0].file) == "nope.csv"
