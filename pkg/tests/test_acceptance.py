"""End-to-end acceptance checks, one test per criterion.

Run ``pytest tests/test_acceptance.py`` to get the PASS/FAIL summary block.
"""

import io
import time

import numpy as np
import pytest

from conftest import SPECIALISTS, write_portfolio
from oracles import greedy_reference, mase_reference, median_reference, pinball, random_forecasts, wql_reference
from tsportfolio import cli
from tsportfolio.analysis import ar_realizations, estimate_bias_variance, fit_scaling_law, generate_synthetic_noiseless
from tsportfolio.combine import greedy_ensemble_selection, select_best
from tsportfolio.compute import PROFILES, flops_forward, strategy_flops
from tsportfolio.core import QuantileForecast
from tsportfolio.datasets import seasonal_benchmark
from tsportfolio.evaluate import RunConfig, evaluate_benchmark
from tsportfolio.metrics import mase, median_point, pinball_loss, wql
from tsportfolio.portfolio import load_portfolio, read_forecast_exchange, write_forecast_exchange


def _members(tensors, levels):
    items = tuple(f"i{k}" for k in range(tensors[0].shape[0]))
    return {f"m{i}": QuantileForecast(items, t, levels) for i, t in enumerate(tensors)}


def _greedy_instances(n=200, seed=2024):
    rng = np.random.default_rng(seed)
    for k in range(n):
        M = int(rng.integers(1, 5))
        tensors, y, levels = random_forecasts(
            rng, M, int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 4))
        )
        if k % 10 == 0 and M > 1:
            # exact duplicates force ties; the earliest member must win
            tensors[-1] = tensors[0].copy()
        yield tensors, y, levels, int(rng.integers(1, 6))


@pytest.mark.criterion(1, "greedy selection equals the exhaustive oracle on 200 instances")
def test_greedy_matches_oracle():
    start = time.perf_counter()
    for tensors, y, levels, steps in _greedy_instances():
        w = greedy_ensemble_selection(_members(tensors, levels), y, steps=steps)
        trace, weights, _ = greedy_reference(tensors, y, levels, steps)
        assert list(w.trace) == trace
        assert w.fractions() == weights
        assert w.weights.tolist() == [float(f) for f in weights]
    assert time.perf_counter() - start < 10.0


@pytest.mark.criterion(2, "first greedy step loss equals the select_best loss bitwise")
def test_step_one_identity():
    for tensors, y, levels, steps in _greedy_instances():
        fcs = _members(tensors, levels)
        w = greedy_ensemble_selection(fcs, y, steps=steps)
        best = select_best(fcs, y)
        winner = best.validation_losses[best.chosen_member_id]
        assert np.float64(w.losses[0]).tobytes() == np.float64(winner).tobytes()
        assert w.member_ids[w.trace[0]] == best.chosen_member_id


@pytest.mark.criterion(3, "wql and mase match reference code; pinball is convex")
def test_metric_oracles():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n, h, nq = (int(x) for x in rng.integers(1, 5, size=3))
        levels = tuple(sorted(rng.choice(np.arange(1, 20) / 20, size=nq, replace=False).tolist()))
        if rng.random() < 0.3 and 0.5 not in levels:
            levels = tuple(sorted(levels + (0.5,)))
        if min(levels) >= 0.5 or max(levels) <= 0.5:
            levels = tuple(sorted(set(levels) | {0.25, 0.75}))
        values = np.sort(rng.normal(0, 5, size=(n, h, len(levels))), axis=2)
        y = rng.normal(0, 5, size=(n, h))
        f = QuantileForecast(tuple(map(str, range(n))), values, levels)
        assert wql(f, y) == pytest.approx(wql_reference(values, y, levels), rel=1e-9, abs=1e-9)

        m = int(rng.integers(1, 4))
        trains = [rng.normal(0, 3, size=int(rng.integers(m + 2, 30))) for _ in range(n)]
        point = median_point(f)
        np.testing.assert_allclose(point, median_reference(values, levels), rtol=1e-12, atol=1e-12)
        assert mase(point, y, trains, m) == pytest.approx(mase_reference(point, y, trains, m), rel=1e-9, abs=1e-9)

    y, a, b = rng.normal(0, 10, size=(3, 100_000))
    q = rng.uniform(0, 1, size=100_000)
    lam = rng.uniform(0, 1, size=100_000)
    lhs = pinball_loss(y, lam * a + (1 - lam) * b, q)
    rhs = lam * pinball_loss(y, a, q) + (1 - lam) * pinball_loss(y, b, q)
    assert np.all(lhs <= rhs + 1e-9 * (1 + np.abs(rhs)))
    assert np.all(pinball_loss(y, a, q) >= 0)
    assert all(pinball_loss(y[i], a[i], q[i]) == pytest.approx(pinball(y[i], a[i], q[i])) for i in range(100))


@pytest.mark.criterion(4, "forward FLOPs per profile and the (N+1) selection rule are exact")
def test_flops_exact():
    hand = {}
    for name, p in PROFILES.items():
        # (L_e + L_d) * (24 T d^2 + 4 T^2 d) written out for each profile
        hand[name] = (p.L_e + p.L_d) * (24 * p.T * p.d**2 + 4 * p.T**2 * p.d)
        assert flops_forward(p) == hand[name]
    assert hand["tiny"] == 1_744_830_464
    assert hand["1m"] == 176_160_768
    assert hand["4m"] == 754_974_720
    assert hand["2m"] == 356_515_840
    for p in PROFILES.values():
        for n in range(1, 65):
            assert strategy_flops("model_selection", p, n).total_flops == (n + 1) * flops_forward(p)


@pytest.mark.criterion(5, "bias-variance identity holds; underfit AR members are bias dominated")
def test_bias_variance():
    rng = np.random.default_rng(11)
    for _ in range(500):
        M = int(rng.integers(2, 9))
        n = int(rng.integers(1, 20))
        f = rng.normal(0, 3, size=(M, n)) + rng.normal(0, 3, size=n)
        y = rng.normal(0, 3, size=n)
        r = estimate_bias_variance(f, y)
        mse = np.array([sum((f[i, k] - y[k]) ** 2 for i in range(M)) / M for k in range(n)])
        np.testing.assert_allclose(mse - r.bias - r.variance, 0.0, atol=1e-9)

    synth = generate_synthetic_noiseless(50, 128, 16, seed=0)
    fc = ar_realizations([s.series for s in synth], 16, 8, seed=0)
    truths = np.stack([s.continuation for s in synth])
    report = estimate_bias_variance(fc, truths)
    assert report.aggregate_bias / report.aggregate_variance > 1


@pytest.mark.criterion(6, "planted power laws are recovered; noisy slopes are significant")
def test_scaling_fit_recovery():
    scales = np.geomspace(1e6, 1e8, 8)
    for alpha in (-0.5, -0.2, -0.05, 0.1):
        fit = fit_scaling_law([(s, 3.0 * s**alpha) for s in scales])
        assert abs(fit.alpha - alpha) < 1e-8

    alpha = -0.15
    hits = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        errors = 3.0 * scales**alpha * np.exp(0.05 * rng.standard_normal(8))
        hits += fit_scaling_law(list(zip(scales, errors))).p_value < 0.05
    assert hits >= 190


@pytest.mark.criterion(7, "matched specialists under best beat a fixed-m member; simple average is worse")
def test_portfolio_beats_generalist(tmp_path):
    start = time.perf_counter()
    manifest = seasonal_benchmark(str(tmp_path / "bench"), seed=0, season_lengths=(7, 12, 24), baseline="sn1")
    portfolio = load_portfolio(write_portfolio(tmp_path / "p.json", SPECIALISTS))
    best = evaluate_benchmark(manifest, RunConfig(portfolio, combiner="best"))
    simple = evaluate_benchmark(manifest, RunConfig(portfolio, combiner="simple"))
    assert best.clean and simple.clean and len(best.results) == 6
    best_score = best.aggregate("portfolio[best]")
    simple_score = simple.aggregate("portfolio[simple]")
    print(f"best={best_score:.4f} simple={simple_score:.4f}")
    assert best_score < 0.95
    assert simple_score > best_score
    assert time.perf_counter() - start < 30.0


@pytest.mark.criterion(8, "evaluate output is byte-identical across parallelism levels")
def test_deterministic_across_jobs(bench, specialist_portfolio, tmp_path, capsys):
    outputs = []
    for jobs in (1, 4):
        out = tmp_path / f"jobs{jobs}"
        args = cli.build_parser().parse_args(
            ["evaluate", "--manifest", bench, "--portfolio", specialist_portfolio, "--seed", "3",
             "--jobs", str(jobs), "--out", str(out)]
        )
        assert cli.cmd_evaluate(args) == 0
        stdout = capsys.readouterr().out
        outputs.append((stdout, (out / "leaderboard.csv").read_bytes(), (out / "weights.csv").read_bytes()))
    assert outputs[0] == outputs[1]


@pytest.mark.criterion(9, "forecast exchange CSV round-trips bit-exactly")
def test_exchange_round_trip():
    rng = np.random.default_rng(5)
    for k in range(100):
        n, h, nq = (int(x) for x in rng.integers(1, 6, size=3))
        levels = tuple(sorted(rng.uniform(0.01, 0.99, size=nq).tolist()))
        scale = 10.0 ** rng.integers(-8, 9)
        values = np.sort(rng.standard_normal((n, h, nq)) * scale, axis=2)
        forecasts = {(f"task{k}", "val"): QuantileForecast(tuple(f"s{i}" for i in range(n)), values, levels)}
        text = write_forecast_exchange(forecasts)
        back = read_forecast_exchange(io.StringIO(text))
        again = read_forecast_exchange(io.StringIO(write_forecast_exchange(back)))
        for bundle in (back, again):
            f = bundle[(f"task{k}", "val")]
            assert f.values.tobytes() == values.tobytes()
            assert f.quantile_levels == levels
        assert write_forecast_exchange(again) == text
