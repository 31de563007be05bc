"""Test-time FLOPs accounting for encoder-decoder forecasters.

Forward cost of one inference pass::

    FLOPs_forward = (L_e + L_d) * T * d^2 * (24 + 4T/d)
                  = (L_e + L_d) * (24*T*d^2 + 4*T^2*d)

The second form is evaluated so integer profiles give exact integers.
A training step costs three forward passes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

from tsportfolio.errors import MissingExtras

DEFAULT_TOKENS = 2048 // 16
DEFAULT_ENSEMBLE_FANOUT = Fraction(5, 2)  # average number of distinct ensemble members


@dataclass(frozen=True)
class ArchitectureProfile:
    L_e: int
    L_d: int
    d: int
    T: int = DEFAULT_TOKENS
    name: str = "custom"

    def __post_init__(self):
        for attr in ("L_e", "L_d", "d", "T"):
            value = getattr(self, attr)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{attr} must be a positive integer, got {value!r}")


PROFILES: dict[str, ArchitectureProfile] = {
    "tiny": ArchitectureProfile(L_e=4, L_d=4, d=256, name="tiny"),
    "4m": ArchitectureProfile(L_e=3, L_d=3, d=192, name="4m"),
    "2m": ArchitectureProfile(L_e=2, L_d=2, d=160, name="2m"),
    "1m": ArchitectureProfile(L_e=2, L_d=1, d=128, name="1m"),
}


def get_profile(name: str) -> ArchitectureProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown architecture profile {name!r}; known: {sorted(PROFILES)}") from None


def flops_forward(p: ArchitectureProfile) -> int:
    return (p.L_e + p.L_d) * (24 * p.T * p.d * p.d + 4 * p.T * p.T * p.d)


def flops_train_step(p: ArchitectureProfile) -> int:
    return 3 * flops_forward(p)


class Strategy(str, enum.Enum):
    ZERO_SHOT = "zero_shot"
    MODEL_SELECTION = "model_selection"
    GREEDY_ENSEMBLE = "greedy_ensemble"
    FINE_TUNE = "fine_tune"


def _exact(x: Fraction):
    return x.numerator if x.denominator == 1 else float(x)


@dataclass(frozen=True)
class ComputeReport:
    strategy: Strategy
    total_flops: int | float
    amortized_flops: int | float
    n_members: int
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.amortized_flops <= self.total_flops:
            raise ValueError("expected 0 < amortized_flops <= total_flops")


def strategy_flops(
    strategy: Strategy | str,
    profile: ArchitectureProfile,
    n_members: int = 1,
    *,
    n_selected: int | None = None,
    n_steps: int | None = None,
    batch_size: int | None = None,
    n_test_series: int | None = None,
) -> ComputeReport:
    """Total and amortized test-time FLOPs of one adaptation strategy.

    ``model_selection`` infers once with each of the ``N`` members and once with
    the winner: ``(N + 1) * forward``. ``greedy_ensemble`` costs ``(N + k)``
    forwards where ``k`` is the number of distinct members the run kept
    (``n_selected``), or 2.5 when no run is supplied. ``fine_tune`` spreads
    ``n_steps * batch_size`` training-step costs over ``n_test_series`` series
    and adds one forward. Amortized figures drop the selection or fine-tuning
    term.
    """
    strategy = Strategy(strategy)
    if n_members < 1:
        raise ValueError("n_members must be >= 1")
    fwd = flops_forward(profile)
    detail = {"forward": fwd}
    if strategy is Strategy.ZERO_SHOT:
        total = amortized = Fraction(fwd)
        n_members = 1
    elif strategy is Strategy.MODEL_SELECTION:
        total, amortized = Fraction((n_members + 1) * fwd), Fraction(fwd)
        detail["selection"] = n_members * fwd
    elif strategy is Strategy.GREEDY_ENSEMBLE:
        k = DEFAULT_ENSEMBLE_FANOUT if n_selected is None else Fraction(n_selected)
        if not 0 < k <= n_members:
            raise ValueError(f"ensemble fan-out {k} must lie in (0, n_members]")
        total, amortized = (n_members + k) * fwd, k * fwd
        detail["selection"] = n_members * fwd
        detail["fanout"] = _exact(k)
    else:
        missing = [
            name
            for name, v in (("n_steps", n_steps), ("batch_size", batch_size), ("n_test_series", n_test_series))
            if v is None
        ]
        if missing:
            raise MissingExtras(f"fine_tune accounting requires {', '.join(missing)}")
        if min(n_steps, batch_size, n_test_series) < 1:
            raise ValueError("n_steps, batch_size and n_test_series must be positive")
        tune = Fraction(n_steps * batch_size * flops_train_step(profile), n_test_series)
        total, amortized = tune + fwd, Fraction(fwd)
        detail["fine_tune_per_series"] = _exact(tune)
        n_members = 1
    return ComputeReport(strategy, _exact(total), _exact(amortized), n_members, detail)
