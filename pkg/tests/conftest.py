import json

import pytest

from tsportfolio.datasets import seasonal_benchmark


def write_portfolio(path, members, name="p"):
    path.write_text(json.dumps({"name": name, "members": members}))
    return str(path)


def builtin(mid, kind="seasonal_naive", spec="generalist", **params):
    return {"id": mid, "specialization": spec, "source": {"builtin": kind, "params": params}}


SPECIALISTS = [
    builtin("sn1", m=1),
    builtin("sn7", spec="frequency:daily", m=7),
    builtin("sn12", spec="frequency:monthly", m=12),
    builtin("sn24", spec="frequency:hourly", m=24),
]


@pytest.fixture
def bench(tmp_path):
    """Synthetic 6-dataset seasonal benchmark; returns the manifest path."""
    manifest = seasonal_benchmark(str(tmp_path / "bench"), seed=0)
    return manifest.path


@pytest.fixture
def specialist_portfolio(tmp_path):
    return write_portfolio(tmp_path / "portfolio.json", SPECIALISTS, "freq")


# -- acceptance report ------------------------------------------------------

_CRITERIA: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    n, title = marker.args
    ok = report.passed if report.when == "call" else not report.failed
    if report.when == "call" or not ok:
        prev = _CRITERIA.get(n, (title, True))[1]
        _CRITERIA[n] = (title, prev and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
