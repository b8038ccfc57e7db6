"""Sweep engine: schedules attempt blocks and dispatches to a kernel.

Two interchangeable kernels exist: a compiled extension (kinex._speedups,
built from Cython) and a pure-Python reference (kinex._pyloop). The driver
pre-draws all random variates for a block in a fixed order and hands them to
whichever kernel is active, so the two engines replay identical trajectories
bit for bit; tests assert that equivalence and the benchmark measures the
speedup. The compiled kernel is used when importable, unless overridden with
set_engine().
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _pyloop
from .boundaries import (
    BankruptcyEvent,
    BoundaryPolicy,
    DebtCap,
    ReserveRatioBank,
    TransferStatus,
    TwoSided,
    accrue_interest,
    bankruptcy_scan,
    lower_bound,
    upper_bound,
)
from .histogram import MoneyHistogram, histogram_from_balances
from .ledger import AgentLedger, SimConfig, init_ledger
from .rules import (
    ExchangeRule,
    FixedAmount,
    Multiplicative,
    RandomSavingPropensity,
    SavingPropensity,
    UniformRandomFraction,
    draw_saving_propensities,
)

try:
    from . import _speedups

    _HAVE_SPEEDUPS = True
except ImportError:  # pragma: no cover - exercised via set_engine in tests
    _speedups = None
    _HAVE_SPEEDUPS = False

__all__ = [
    "RunResult",
    "run_simulation",
    "set_engine",
    "active_engine",
    "available_engines",
    "EngineUnavailableError",
]

_MAX_BLOCK_ATTEMPTS = 1_000_000

_forced_engine: str | None = None


class EngineUnavailableError(RuntimeError):
    pass


def available_engines() -> list[str]:
    names = ["python"]
    if _HAVE_SPEEDUPS:
        names.insert(0, "compiled")
    return names


def set_engine(name: str | None) -> None:
    """Force a kernel ("compiled" or "python"); None restores auto-select."""
    global _forced_engine
    if name is not None:
        if name not in ("compiled", "python"):
            raise ValueError(f"unknown engine {name!r}")
        if name == "compiled" and not _HAVE_SPEEDUPS:
            raise EngineUnavailableError("compiled kernel is not importable")
    _forced_engine = name


def active_engine() -> str:
    if _forced_engine is not None:
        return _forced_engine
    return "compiled" if _HAVE_SPEEDUPS else "python"


def _kernel_module(engine: str):
    return _speedups if engine == "compiled" else _pyloop


def _encode_rule(rule: ExchangeRule, mean_money: float) -> tuple[int, float]:
    if isinstance(rule, FixedAmount):
        return _pyloop.RULE_FIXED, rule.amount
    if isinstance(rule, UniformRandomFraction):
        return _pyloop.RULE_UNIFRAC, mean_money if rule.scale is None else rule.scale
    if isinstance(rule, Multiplicative):
        return _pyloop.RULE_MULT, rule.fraction
    if isinstance(rule, SavingPropensity):
        return _pyloop.RULE_SAVE, rule.propensity
    if isinstance(rule, RandomSavingPropensity):
        return _pyloop.RULE_SAVE_RANDOM, 0.0
    raise TypeError(f"unknown rule type {type(rule).__name__}")


def _blocked_count_names(policy: BoundaryPolicy) -> dict[int, str]:
    floor_name = (
        "blocked_debt_cap"
        if isinstance(policy, (DebtCap, TwoSided))
        else "blocked_insufficient_funds"
    )
    return {
        _pyloop.N_EXECUTED: "executed",
        _pyloop.N_BLOCKED_FLOOR: floor_name,
        _pyloop.N_BLOCKED_CEILING: "blocked_upper_bound",
        _pyloop.N_BLOCKED_BANK: "blocked_bank_cap",
        _pyloop.N_REFINANCED: "refinanced",
    }


@dataclass
class RunResult:
    """Everything a run produced, in memory."""

    config: SimConfig
    histograms: list[MoneyHistogram]
    final_balances: np.ndarray
    ledger: AgentLedger
    counts: dict[str, int]
    bankruptcies: list[BankruptcyEvent]
    engine: str
    elapsed_seconds: float
    balance_snapshots: list[tuple[int, np.ndarray]] | None = None
    propensities: np.ndarray | None = None

    @property
    def final_histogram(self) -> MoneyHistogram:
        return self.histograms[-1]


def run_simulation(config: SimConfig, engine: str | None = None) -> RunResult:
    """Run a complete simulation from a fresh ledger.

    The trajectory is a pure function of the config (seed included): engine
    choice, thread placement, and block scheduling do not change it.
    """
    started = time.perf_counter()
    ledger = init_ledger(config)
    policy = config.boundary
    n = config.num_agents
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))

    propensities = draw_saving_propensities(config.rule, n, rng)
    mean_money = ledger.monetary_base / n
    rule_kind, rule_param = _encode_rule(config.rule, mean_money)
    floor = lower_bound(policy)
    ceiling = upper_bound(policy)
    reserve = isinstance(policy, ReserveRatioBank)
    hooks = policy.has_sweep_hooks
    kernel = _kernel_module(engine or active_engine())

    bin_width = config.resolved_bin_width()
    snap_points = set(range(0, config.sweeps + 1, config.snapshot_every))
    snap_points.add(config.sweeps)

    counts = np.zeros(5, dtype=np.int64)
    bank_total = np.zeros(1, dtype=np.float64)
    histograms: list[MoneyHistogram] = []
    balance_snaps: list[tuple[int, np.ndarray]] | None = (
        [] if config.keep_balance_snapshots else None
    )
    bankruptcies: list[BankruptcyEvent] = []

    def take_snapshot(sweep: int) -> None:
        histograms.append(
            histogram_from_balances(ledger.balances, bin_width, anchor=0.0, sweep=sweep)
        )
        if balance_snaps is not None:
            balance_snaps.append((sweep, ledger.balances.copy()))

    take_snapshot(0)
    max_block_sweeps = max(1, _MAX_BLOCK_ATTEMPTS // n)
    sweep = 0
    while sweep < config.sweeps:
        if hooks:
            stop = sweep + 1
        else:
            stop = min(
                min((p for p in snap_points if p > sweep), default=config.sweeps),
                sweep + max_block_sweeps,
            )
        attempts = (stop - sweep) * n
        pay = rng.integers(0, n, size=attempts, dtype=np.int64)
        recv = rng.integers(0, n - 1, size=attempts, dtype=np.int64)
        u = rng.random(attempts)
        if reserve:
            pay2 = rng.integers(0, n, size=attempts, dtype=np.int64)
            recv2 = rng.integers(0, n - 1, size=attempts, dtype=np.int64)
            u2 = rng.random(attempts)
            bank_total[0] = ledger.bank.total_loans_outstanding
            kernel.run_block_reserve(
                ledger.balances,
                ledger.cash,
                ledger.loans,
                pay,
                recv,
                u,
                pay2,
                recv2,
                u2,
                rule_kind,
                rule_param,
                ledger.bank.loan_cap,
                bank_total,
                counts,
            )
            ledger.bank.total_loans_outstanding = float(bank_total[0])
        else:
            kernel.run_block(
                ledger.balances,
                pay,
                recv,
                u,
                rule_kind,
                rule_param,
                propensities,
                floor,
                ceiling,
                counts,
            )
        ledger.transaction_count += attempts
        sweep = stop
        if hooks:
            accrue_interest(ledger, policy)
            bankruptcies.extend(bankruptcy_scan(ledger, policy, sweep))
        if sweep in snap_points:
            take_snapshot(sweep)

    names = _blocked_count_names(policy)
    count_map = {name: int(counts[idx]) for idx, name in names.items()}
    count_map["attempts"] = int(ledger.transaction_count)
    return RunResult(
        config=config,
        histograms=histograms,
        final_balances=ledger.balances.copy(),
        ledger=ledger,
        counts=count_map,
        bankruptcies=bankruptcies,
        engine=engine or active_engine(),
        elapsed_seconds=time.perf_counter() - started,
        balance_snapshots=balance_snaps,
        propensities=propensities if rule_kind == _pyloop.RULE_SAVE_RANDOM else None,
    )
