"""Command-line interface.

Subcommands: ``evaluate``, ``flops``, ``bias-variance``, ``synth``,
``scaling-fit`` and ``weights-heatmap``. Each prints its main table as CSV
(or markdown with ``--markdown``) and, given ``--out DIR``, also writes the
tables there; ``--figures`` additionally renders PNG figures into ``DIR``.
"""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
from collections import defaultdict

import numpy as np

from tsportfolio import analysis, compute
from tsportfolio.combine import DEFAULT_STEPS, EnsembleWeights
from tsportfolio.datasets import load_manifest, seasonal_benchmark, write_series_csv
from tsportfolio.errors import PortfolioError
from tsportfolio.evaluate import (
    COMBINERS,
    LEADERBOARD_COLUMNS,
    WEIGHT_COLUMNS,
    RunConfig,
    default_parallelism,
    evaluate_benchmark,
)
from tsportfolio.metrics import median_point
from tsportfolio.portfolio import EXCHANGE_HEADER, load_portfolio, read_forecast_exchange
from tsportfolio.tables import read_csv_rows, render, to_csv

logger = logging.getLogger("tsportfolio")

EXIT_FAILED_DATASETS = 1
EXIT_USAGE = 2


def _emit(args, name, rows, columns):
    """Print a table and write it under ``--out`` when given."""
    rows = list(rows)
    text = render(rows, columns, args.markdown)
    sys.stdout.write(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{name}.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(to_csv(rows, columns))
        if args.markdown:
            with open(os.path.join(args.out, f"{name}.md"), "w", encoding="utf-8") as fh:
                fh.write(text)


def _figure_path(args, name):
    if not args.figures:
        return None
    if not args.out:
        raise PortfolioError("--figures needs --out DIR")
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, f"{name}.png")


# -- evaluate ---------------------------------------------------------------

def cmd_evaluate(args) -> int:
    manifest = load_manifest(args.manifest)
    config = RunConfig(
        portfolio=load_portfolio(args.portfolio),
        combiner=args.combiner,
        steps=args.steps,
        metric=args.metric,
        seed=args.seed,
        parallelism=args.jobs,
        group_by=args.group_by,
        fill_missing=args.fill_missing,
        best_iteration=args.best_iteration,
    )
    board = evaluate_benchmark(manifest, config)
    _emit(args, "leaderboard", board.rows, LEADERBOARD_COLUMNS)
    if args.out:
        with open(os.path.join(args.out, "weights.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(to_csv(board.weight_rows(), WEIGHT_COLUMNS))
    path = _figure_path(args, "leaderboard")
    if path and any(r.ok for r in board.results):
        from tsportfolio import plotting

        plotting.leaderboard_figure(board, path)
        runs = _runs_from_rows(board.weight_rows())
        plotting.weight_heatmap_figure(
            analysis.weight_assignment_matrix(runs, analysis.BY_TASK_GROUP),
            os.path.join(args.out, "weights.png"),
        )
    for r in board.failed:
        print(f"dataset {r.dataset_id} failed: {r.error}", file=sys.stderr)
    return EXIT_FAILED_DATASETS if board.failed else 0


# -- flops ------------------------------------------------------------------

def cmd_flops(args) -> int:
    if args.profile:
        try:
            profile = compute.get_profile(args.profile)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return EXIT_USAGE
    else:
        if None in (args.enc_layers, args.dec_layers, args.d_model):
            print("error: give --profile or all of --enc-layers/--dec-layers/--d-model", file=sys.stderr)
            return EXIT_USAGE
        profile = compute.ArchitectureProfile(args.enc_layers, args.dec_layers, args.d_model, args.tokens)
    report = compute.strategy_flops(
        args.strategy,
        profile,
        args.n,
        n_selected=args.k,
        n_steps=args.steps,
        batch_size=args.batch_size,
        n_test_series=args.n_test_series,
    )
    row = {
        "profile": profile.name,
        "strategy": report.strategy.value,
        "n_members": report.n_members,
        "forward_flops": compute.flops_forward(profile),
        "total_flops": report.total_flops,
        "amortized_flops": report.amortized_flops,
    }
    _emit(args, "flops", [row], list(row))
    return 0


# -- bias-variance ----------------------------------------------------------

def _read_point_table(path) -> dict[tuple[str, int], float]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) == EXCHANGE_HEADER:
        out = {}
        for (task, window), f in read_forecast_exchange(path).items():
            point = median_point(f)
            for i, item in enumerate(f.item_ids):
                for s in range(f.horizon):
                    out[(item, s + 1)] = float(point[i, s])
        return out
    rows = read_csv_rows(path)
    if not rows or set(rows[0]) != {"item_id", "step", "value"}:
        raise PortfolioError(f"{path}: expected columns item_id,step,value or the exchange format")
    out = {}
    for r in rows:
        key = (r["item_id"], int(r["step"]))
        if key in out:
            raise PortfolioError(f"{path}: duplicate row {key}")
        out[key] = float(r["value"])
    return out


def cmd_bias_variance(args) -> int:
    truths = _read_point_table(args.truths)
    keys = sorted(truths)
    forecasts = []
    for path in args.forecasts:
        table = _read_point_table(path)
        missing = [k for k in keys if k not in table]
        if missing:
            raise PortfolioError(f"{path}: no forecast for {missing[0]}")
        forecasts.append([table[k] for k in keys])
    report = analysis.estimate_bias_variance(np.array(forecasts), [truths[k] for k in keys])
    rows = [
        {"item_id": item, "step": step, "bias": b, "variance": v}
        for (item, step), b, v in zip(keys, report.bias.tolist(), report.variance.tolist())
    ]
    rows.append({"item_id": "mean", "step": "", "bias": report.aggregate_bias, "variance": report.aggregate_variance})
    _emit(args, "bias_variance", rows, ["item_id", "step", "bias", "variance"])
    path = _figure_path(args, "bias_variance")
    if path:
        from tsportfolio import plotting

        plotting.bias_variance_figure(report, path)
    return 0


# -- synth ------------------------------------------------------------------

def _write_points(path, items, values):
    rows = [
        {"item_id": item, "step": s + 1, "value": float(v)}
        for item, row in zip(items, values)
        for s, v in enumerate(row)
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(rows, ["item_id", "step", "value"]))


def cmd_synth(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.benchmark:
        manifest = seasonal_benchmark(args.out, args.seed, n_datasets=args.n_datasets)
        rows = [
            {"dataset": d.id, "season_length": d.season_length, "horizon": d.horizon, "file": os.path.basename(d.file)}
            for d in manifest.datasets
        ]
        sys.stdout.write(render(rows, ["dataset", "season_length", "horizon", "file"], args.markdown))
        return 0
    synth = analysis.generate_synthetic_noiseless(
        args.n_series, args.length, args.horizon, args.seed, n_components=args.components
    )
    series = [s.series for s in synth]
    items = [s.id for s in series]
    write_series_csv(series, os.path.join(args.out, "series.csv"))
    _write_points(os.path.join(args.out, "truths.csv"), items, [s.continuation for s in synth])
    params = [
        {
            "item_id": s.series.id,
            "constant": s.params.constant,
            "slope": s.params.slope,
            "periods": " ".join(map(repr, s.params.periods)),
            "amplitudes": " ".join(map(repr, s.params.amplitudes)),
            "phases": " ".join(map(repr, s.params.phases)),
        }
        for s in synth
    ]
    with open(os.path.join(args.out, "params.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(params, list(params[0])))
    if args.realizations:
        fc = analysis.ar_realizations(series, args.horizon, args.realizations, args.seed, p=args.ar_order)
        for r in range(args.realizations):
            _write_points(os.path.join(args.out, f"realization_{r}.csv"), items, fc[r])
    sys.stdout.write(f"wrote {len(series)} series to {args.out}\n")
    return 0


# -- scaling-fit ------------------------------------------------------------

def cmd_scaling_fit(args) -> int:
    rows = read_csv_rows(args.points)
    groups: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for r in rows:
        groups[r.get("group") or "all"].append((float(r["scale"]), float(r["error"])))
    out, fits = [], {}
    for group in sorted(groups):
        fit = analysis.fit_scaling_law(groups[group])
        fits[group] = (groups[group], fit)
        out.append(
            {
                "group": group,
                "alpha": fit.alpha,
                "intercept": fit.intercept,
                "p_value": fit.p_value,
                "r_squared": fit.r_squared,
                "n_points": fit.n_points,
                "significant": fit.significant(),
            }
        )
    _emit(args, "scaling_fit", out, ["group", "alpha", "intercept", "p_value", "r_squared", "n_points", "significant"])
    path = _figure_path(args, "scaling_fit")
    if path:
        from tsportfolio import plotting

        plotting.scaling_fit_figure(fits, path)
    return 0


# -- weights-heatmap --------------------------------------------------------

def _runs_from_rows(rows) -> list[tuple[str, str, EnsembleWeights]]:
    by_task: dict[str, tuple[str, dict[str, float]]] = {}
    for r in rows:
        group, weights = by_task.setdefault(r["task_id"], (r["group"], {}))
        if r["group"] != group:
            raise PortfolioError(f"task {r['task_id']!r} is listed under several groups")
        weights[r["member_id"]] = float(r["weight"])
    return [
        (task, group, EnsembleWeights(tuple(w), np.array(list(w.values()))))
        for task, (group, w) in by_task.items()
    ]


def cmd_weights_heatmap(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.runs, "*.csv"))) if os.path.isdir(args.runs) else [args.runs]
    if not paths:
        raise PortfolioError(f"no run files under {args.runs}")
    rows = [r for p in paths for r in read_csv_rows(p)]
    matrix = analysis.weight_assignment_matrix(_runs_from_rows(rows), args.grouping)
    table = [dict(zip(["row", *matrix.column_labels], r)) for r in matrix.to_rows()]
    _emit(args, "weights_heatmap", table, ["row", *matrix.column_labels])
    path = _figure_path(args, "weights_heatmap")
    if path:
        from tsportfolio import plotting

        plotting.weight_heatmap_figure(matrix, path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsportfolio", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="directory for output tables")
        p.add_argument("--markdown", action="store_true", help="print markdown instead of CSV")
        p.add_argument("--figures", action="store_true", help="also render PNG figures into --out")

    p = sub.add_parser("evaluate", help="evaluate a portfolio on a benchmark manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--portfolio", required=True)
    p.add_argument("--combiner", choices=COMBINERS, default="greedy")
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS, help="greedy selection steps")
    p.add_argument("--metric", choices=["wql", "mase"], default="wql", help="validation loss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=default_parallelism(), help="dataset worker threads")
    p.add_argument("--group-by", choices=["frequency", "domain"], default="frequency")
    p.add_argument("--fill-missing", action="store_true", help="forward-fill missing targets")
    p.add_argument("--best-iteration", action="store_true", help="keep the best greedy step, not the last")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("flops", help="test-time FLOPs of an adaptation strategy")
    p.add_argument("--profile", help=f"one of {sorted(compute.PROFILES)}")
    p.add_argument("--enc-layers", type=int)
    p.add_argument("--dec-layers", type=int)
    p.add_argument("--d-model", type=int)
    p.add_argument("--tokens", type=int, default=compute.DEFAULT_TOKENS)
    p.add_argument("--strategy", choices=[s.value for s in compute.Strategy], default="zero_shot")
    p.add_argument("--n", type=int, default=1, help="portfolio size")
    p.add_argument("--k", type=int, help="distinct ensemble members (default 2.5)")
    p.add_argument("--steps", type=int, default=1000, help="fine-tuning gradient steps")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--n-test-series", type=int)
    common(p)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("bias-variance", help="bias and variance across model realizations")
    p.add_argument("--forecasts", nargs="+", required=True)
    p.add_argument("--truths", required=True)
    common(p)
    p.set_defaults(func=cmd_bias_variance)

    p = sub.add_parser("synth", help="generate synthetic series")
    p.add_argument("--out", required=True)
    p.add_argument("--n-series", type=int, default=100)
    p.add_argument("--length", type=int, default=256)
    p.add_argument("--horizon", type=int, default=32)
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realizations", type=int, default=0, help="also write M underfit AR forecasts")
    p.add_argument("--ar-order", type=int, default=1)
    p.add_argument("--benchmark", action="store_true", help="write a seasonal benchmark manifest instead")
    p.add_argument("--n-datasets", type=int, default=6)
    p.add_argument("--markdown", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("scaling-fit", help="log-log OLS fit of error against scale")
    p.add_argument("--points", required=True, help="CSV with scale,error[,group]")
    common(p)
    p.set_defaults(func=cmd_scaling_fit)

    p = sub.add_parser("weights-heatmap", help="ensemble weight matrix by task group")
    p.add_argument("--runs", required=True, help="weights CSV or a directory of them")
    p.add_argument("--grouping", choices=[analysis.BY_TASK_GROUP, analysis.BY_SPECIALIZATION],
                   default=analysis.BY_TASK_GROUP)
    common(p)
    p.set_defaults(func=cmd_weights_heatmap)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (PortfolioError, ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
