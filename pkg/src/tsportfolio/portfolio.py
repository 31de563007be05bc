"""Portfolio members, metadata filtering and the forecast exchange format.

The exchange format is a UTF-8 CSV with header::

    task_id,window_id,item_id,step,quantile,value

``step`` runs from 1 to H. Floats are written with ``repr`` so a
write/read cycle is bit-exact. Rows may come in any order; a repeated
``(task_id, window_id, item_id, step, quantile)`` key is a schema error.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from tsportfolio.baselines import Forecaster, make_forecaster
from tsportfolio.compute import ArchitectureProfile, get_profile
from tsportfolio.core import QuantileForecast, count_crossings, enforce_monotone_quantiles
from tsportfolio.errors import CoverageError, EmptyPortfolio, SchemaError

logger = logging.getLogger(__name__)

EXCHANGE_HEADER = ("task_id", "window_id", "item_id", "step", "quantile", "value")

GENERALIST, FREQUENCY, DOMAIN = "generalist", "frequency", "domain"


@dataclass(frozen=True)
class Specialization:
    kind: str = GENERALIST
    value: str | None = None

    def __post_init__(self):
        if self.kind == GENERALIST:
            if self.value is not None:
                raise ValueError("a generalist carries no specialization value")
        elif self.kind in (FREQUENCY, DOMAIN):
            if not self.value:
                raise ValueError(f"{self.kind} specialization needs a value")
        else:
            raise ValueError(f"unknown specialization kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Specialization":
        """``"generalist"``, ``"frequency:hourly"`` or ``"domain:energy"``."""
        kind, _, value = text.partition(":")
        return cls(kind, value or None)

    @property
    def is_generalist(self) -> bool:
        return self.kind == GENERALIST

    def __str__(self):
        return self.kind if self.value is None else f"{self.kind}:{self.value}"


@dataclass(frozen=True)
class BuiltinSource:
    kind: str
    params: tuple[tuple[str, object], ...] = ()

    def build(self) -> Forecaster:
        return make_forecaster(self.kind, **dict(self.params))


@dataclass(frozen=True)
class ExternalSource:
    path: str


@dataclass(frozen=True)
class PortfolioMember:
    id: str
    source: BuiltinSource | ExternalSource
    specialization: Specialization = field(default_factory=Specialization)
    architecture: ArchitectureProfile | None = None

    @property
    def is_external(self) -> bool:
        return isinstance(self.source, ExternalSource)


@dataclass(frozen=True)
class Portfolio:
    name: str
    members: tuple[PortfolioMember, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise EmptyPortfolio(f"portfolio {self.name!r} has no members")
        ids = [m.id for m in members]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate member ids in portfolio {self.name!r}: {dupes}")
        object.__setattr__(self, "members", members)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.members)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, member_id: str) -> PortfolioMember:
        for m in self.members:
            if m.id == member_id:
                return m
        raise KeyError(member_id)

    def __contains__(self, member_id) -> bool:
        return member_id in self.ids


def filter_members(
    portfolio: Portfolio, predicate: Callable[[Specialization], bool], name: str | None = None
) -> Portfolio:
    """Order-preserving subset of members whose specialization passes ``predicate``."""
    kept = tuple(m for m in portfolio.members if predicate(m.specialization))
    if not kept:
        raise EmptyPortfolio(f"filter removed every member of {portfolio.name!r}")
    return Portfolio(name or portfolio.name, kept)


def no_generalists(spec: Specialization) -> bool:
    return not spec.is_generalist


def _member_from_dict(raw: Mapping, base_dir: str) -> PortfolioMember:
    src = raw.get("source", {})
    if "builtin" in src:
        source = BuiltinSource(src["builtin"], tuple(sorted(src.get("params", {}).items())))
    elif "external" in src:
        path = src["external"]
        source = ExternalSource(path if os.path.isabs(path) else os.path.join(base_dir, path))
    else:
        raise ValueError(f"member {raw.get('id')!r} needs a 'builtin' or 'external' source")
    arch = raw.get("architecture")
    if isinstance(arch, str):
        arch = get_profile(arch)
    elif isinstance(arch, Mapping):
        arch = ArchitectureProfile(**arch)
    return PortfolioMember(
        raw["id"], source, Specialization.parse(raw.get("specialization", GENERALIST)), arch
    )


def load_portfolio(path: str) -> Portfolio:
    """Read a portfolio JSON file.

    Example::

        {"name": "freq",
         "members": [
           {"id": "sn7", "specialization": "frequency:daily",
            "source": {"builtin": "seasonal_naive", "params": {"m": 7}}},
           {"id": "bolt", "source": {"external": "bolt_forecasts.csv"}}]}
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    return Portfolio(raw.get("name", "portfolio"), tuple(_member_from_dict(m, base) for m in raw["members"]))


class ForecastBundle(dict):
    """``{(task_id, window_id): QuantileForecast}`` plus the number of corrected crossings."""

    n_corrected: int = 0


def _parse_row(row: list[str], lineno: int):
    if len(row) != len(EXCHANGE_HEADER):
        raise SchemaError(f"line {lineno}: expected {len(EXCHANGE_HEADER)} fields, got {len(row)}")
    task, window, item, step, q, value = row
    try:
        step_i = int(step)
        q_f = float(q)
        v_f = float(value)
    except ValueError as exc:
        raise SchemaError(f"line {lineno}: {exc}") from None
    if step_i < 1:
        raise SchemaError(f"line {lineno}: step must be >= 1")
    if not 0.0 < q_f < 1.0:
        raise SchemaError(f"line {lineno}: quantile {q} outside (0, 1)")
    if not math.isfinite(v_f):
        raise SchemaError(f"line {lineno}: non-finite value")
    return (task, window), item, step_i, q_f, v_f


def read_forecast_exchange(
    source, quantile_levels: Iterable[float] | None = None
) -> ForecastBundle:
    """Parse an exchange CSV (path or text stream) into quantile forecast tensors.

    Every item must cover steps ``1..H`` at every quantile level, where ``H`` is
    the largest step in its (task, window) group and the levels are
    ``quantile_levels`` or, if not given, all levels present in the group.
    Crossing quantiles are corrected by running maximum and counted.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            return read_forecast_exchange(fh, quantile_levels)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != EXCHANGE_HEADER:
        raise SchemaError(f"bad header {header!r}; expected {','.join(EXCHANGE_HEADER)}")

    groups: dict[tuple[str, str], dict[str, dict[tuple[int, float], float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        key, item, step, q, value = _parse_row(row, lineno)
        cells = groups.setdefault(key, {}).setdefault(item, {})
        if (step, q) in cells:
            raise SchemaError(f"line {lineno}: duplicate row for {key + (item, step, q)}")
        cells[(step, q)] = value

    expected = None if quantile_levels is None else tuple(sorted(float(q) for q in quantile_levels))
    bundle = ForecastBundle()
    for key, items in groups.items():
        levels = expected or tuple(sorted({q for c in items.values() for _, q in c}))
        horizon = max(s for c in items.values() for s, _ in c)
        values = np.empty((len(items), horizon, len(levels)))
        for i, (item, cells) in enumerate(items.items()):
            for s in range(1, horizon + 1):
                for j, q in enumerate(levels):
                    try:
                        values[i, s - 1, j] = cells[(s, q)]
                    except KeyError:
                        raise CoverageError(
                            f"task {key[0]!r} window {key[1]!r}: item {item!r} "
                            f"has no value for step {s}, quantile {q!r}"
                        ) from None
            extra = {q for _, q in cells} - set(levels)
            if extra:
                raise CoverageError(
                    f"task {key[0]!r} window {key[1]!r}: item {item!r} has unexpected "
                    f"quantile levels {sorted(extra)}"
                )
        forecast = QuantileForecast(tuple(items), values, levels)
        n_bad = count_crossings(forecast)
        if n_bad:
            forecast = enforce_monotone_quantiles(forecast)
            bundle.n_corrected += n_bad
        bundle[key] = forecast
    if bundle.n_corrected:
        logger.warning("corrected %d crossing quantile vectors", bundle.n_corrected)
    return bundle


def ingest_external_forecasts(path, quantile_levels=None) -> ForecastBundle:
    return read_forecast_exchange(path, quantile_levels)


def write_forecast_exchange(forecasts: Mapping[tuple[str, str], QuantileForecast], target=None):
    """Serialize forecasts; returns the CSV text when ``target`` is None."""
    if target is None:
        buf = io.StringIO()
        write_forecast_exchange(forecasts, buf)
        return buf.getvalue()
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            return write_forecast_exchange(forecasts, fh)
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(EXCHANGE_HEADER)
    for (task, window), f in forecasts.items():
        for i, item in enumerate(f.item_ids):
            for s in range(f.horizon):
                for j, q in enumerate(f.quantile_levels):
                    writer.writerow([task, window, item, s + 1, repr(q), repr(float(f.values[i, s, j]))])
    return None
