"""Agent ledger, run configuration, and the single-transfer operation.

attempt_transfer is the semantic contract for one trade attempt: the engine
kernels (compiled and pure Python) replay exactly this arithmetic in a loop,
so anything validated here holds for long runs too.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .boundaries import (
    BankState,
    BoundaryPolicy,
    NoDebt,
    ReserveRatioBank,
    TransferStatus,
    Unlimited,
    UpperBound,
    admit_transfer,
    make_bank,
)
from .rules import (
    ExchangeRule,
    FixedAmount,
    Multiplicative,
    UniformRandomFraction,
    is_saving_rule,
)

__all__ = [
    "AgentLedger",
    "SimConfig",
    "ConfigError",
    "TransferOutcome",
    "init_ledger",
    "attempt_transfer",
    "conservation_report",
    "validate_config",
]


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one run."""

    num_agents: int
    initial_balance: float
    rule: ExchangeRule
    boundary: BoundaryPolicy
    sweeps: int
    seed: int
    snapshot_every: int = 100
    bin_width: float | None = None
    integer_mode: bool = False
    keep_balance_snapshots: bool = False

    def resolved_bin_width(self) -> float:
        if self.bin_width is not None:
            return self.bin_width
        return self.initial_balance / 20.0


def validate_config(config: SimConfig) -> None:
    if config.num_agents < 2:
        raise ConfigError("num_agents", "need at least two agents")
    if not np.isfinite(config.initial_balance) or config.initial_balance < 0:
        raise ConfigError("initial_balance", "must be finite and non-negative")
    if config.sweeps < 0:
        raise ConfigError("sweeps", "must be non-negative")
    if config.snapshot_every < 1:
        raise ConfigError("snapshot_every", "must be at least 1")
    if config.bin_width is None and config.initial_balance == 0:
        raise ConfigError("bin_width", "required when initial_balance is zero")
    if config.bin_width is not None and not config.bin_width > 0:
        raise ConfigError("bin_width", "must be positive")
    rule, boundary = config.rule, config.boundary
    if isinstance(rule, Multiplicative) and not isinstance(
        boundary, (NoDebt, UpperBound)
    ):
        raise ConfigError(
            "rule", "multiplicative transfers need balances bounded below by zero"
        )
    if is_saving_rule(rule) and not isinstance(boundary, NoDebt):
        raise ConfigError("rule", "saving-propensity rules require the no-debt policy")
    if config.integer_mode:
        if not isinstance(rule, FixedAmount):
            raise ConfigError("integer_mode", "requires the fixed-amount rule")
        if rule.amount != round(rule.amount):
            raise ConfigError("integer_mode", "transfer amount must be an integer")
        if config.initial_balance != round(config.initial_balance):
            raise ConfigError("integer_mode", "initial balance must be an integer")
        for name in ("max_debt", "max_balance", "bankruptcy_threshold"):
            value = getattr(boundary, name, None)
            if value is not None and value != round(value):
                raise ConfigError("integer_mode", f"{name} must be an integer")
        if boundary.interest is not None and boundary.interest.active:
            raise ConfigError("integer_mode", "interest is not representable")


@dataclass
class AgentLedger:
    """Balances plus global accounting state.

    ``external_flux`` accumulates money created or destroyed by interest and
    ``erased_debt`` what bankruptcy resets annihilated, so that

        sum(balances) == monetary_base + external_flux + erased_debt

    holds to rounding at all times. Reserve-regime ledgers additionally carry
    per-agent cash and loan accounts with balances == cash - loans.
    """

    balances: np.ndarray
    monetary_base: float
    bank: BankState
    transaction_count: int = 0
    cash: np.ndarray | None = None
    loans: np.ndarray | None = None
    external_flux: float = 0.0
    erased_debt: float = 0.0

    @property
    def num_agents(self) -> int:
        return int(self.balances.shape[0])


def init_ledger(config: SimConfig) -> AgentLedger:
    validate_config(config)
    n = config.num_agents
    balances = np.full(n, float(config.initial_balance), dtype=np.float64)
    base = float(config.initial_balance) * n
    bank = make_bank(config.boundary, base)
    ledger = AgentLedger(balances=balances, monetary_base=base, bank=bank)
    if isinstance(config.boundary, ReserveRatioBank):
        ledger.cash = balances.copy()
        ledger.loans = np.zeros(n, dtype=np.float64)
    return ledger


@dataclass(frozen=True)
class TransferOutcome:
    payer: int
    receiver: int
    amount: float
    status: TransferStatus

    @property
    def executed(self) -> bool:
        return self.status is TransferStatus.EXECUTED


def attempt_transfer(
    ledger: AgentLedger,
    policy: BoundaryPolicy,
    payer: int,
    receiver: int,
    amount: float,
) -> TransferOutcome:
    """Try to move ``amount`` from payer to receiver under ``policy``.

    Blocked attempts leave every balance untouched but still count as a
    transaction (a used time step). Amounts are never truncated to fit.
    """
    n = ledger.num_agents
    if not 0 <= payer < n:
        raise IndexError(f"payer index {payer} out of range")
    if not 0 <= receiver < n:
        raise IndexError(f"receiver index {receiver} out of range")
    if payer == receiver:
        raise ValueError("payer and receiver must differ")
    if not np.isfinite(amount) or amount < 0:
        raise ValueError("amount must be finite and non-negative")

    ledger.transaction_count += 1
    balances = ledger.balances
    if ledger.cash is not None:
        status = admit_transfer(
            policy,
            ledger.bank,
            float(balances[payer]),
            float(balances[receiver]),
            amount,
            payer_cash=float(ledger.cash[payer]),
        )
        if status is TransferStatus.EXECUTED:
            cash, loans = ledger.cash, ledger.loans
            shortfall = amount - cash[payer]
            if shortfall > 0.0:
                loans[payer] = loans[payer] + shortfall
                ledger.bank.total_loans_outstanding += float(shortfall)
                cash[payer] = 0.0
            else:
                cash[payer] = cash[payer] - amount
            cash[receiver] = cash[receiver] + amount
            balances[payer] = cash[payer] - loans[payer]
            balances[receiver] = cash[receiver] - loans[receiver]
        return TransferOutcome(payer, receiver, amount, status)

    status = admit_transfer(
        policy, ledger.bank, float(balances[payer]), float(balances[receiver]), amount
    )
    if status is TransferStatus.EXECUTED:
        balances[payer] = balances[payer] - amount
        balances[receiver] = balances[receiver] + amount
    return TransferOutcome(payer, receiver, amount, status)


def conservation_report(ledger: AgentLedger) -> tuple[float, float, float]:
    """(expected total, actual total, relative drift)."""
    expected = ledger.monetary_base + ledger.external_flux + ledger.erased_debt
    actual = float(ledger.balances.sum())
    scale = max(abs(expected), abs(actual), 1.0)
    return expected, actual, abs(actual - expected) / scale
