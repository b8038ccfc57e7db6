"""Boundary and debt policies.

A policy decides whether a proposed transfer is admissible (blocked moves are
rejected outright, never truncated) and owns the optional per-sweep hooks:
interest accrual and bankruptcy resets.

The reserve-ratio policy is the one stateful case: agents then carry separate
cash and loan accounts (net balance = cash - loans), payments are made from
cash, and shortfalls are borrowed from a shared bank whose outstanding loans
may never exceed ``loan_cap``. A payment is blocked only when the bank is at
its cap; personal debt has no individual limit in that regime.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TransferStatus",
    "InterestRates",
    "NoDebt",
    "DebtCap",
    "ReserveRatioBank",
    "Unlimited",
    "UpperBound",
    "TwoSided",
    "BoundaryPolicy",
    "BankState",
    "make_bank",
    "lower_bound",
    "upper_bound",
    "admit_transfer",
    "accrue_interest",
    "bankruptcy_scan",
    "InterestReport",
    "BankruptcyEvent",
]


class TransferStatus(enum.Enum):
    EXECUTED = "executed"
    BLOCKED_INSUFFICIENT_FUNDS = "blocked_insufficient_funds"
    BLOCKED_DEBT_CAP = "blocked_debt_cap"
    BLOCKED_BANK_CAP = "blocked_bank_cap"
    BLOCKED_UPPER_BOUND = "blocked_upper_bound"


@dataclass(frozen=True)
class InterestRates:
    """Per-sweep simple interest on positive (deposit) and negative (loan)
    parts of each balance. Either rate may be zero."""

    deposit_rate: float = 0.0
    loan_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.deposit_rate < 0 or self.loan_rate < 0:
            raise ValueError("interest rates must be non-negative")

    @property
    def active(self) -> bool:
        return self.deposit_rate != 0.0 or self.loan_rate != 0.0


@dataclass(frozen=True, kw_only=True)
class _PolicyBase:
    bankruptcy_threshold: float | None = None
    interest: InterestRates | None = None

    def __post_init__(self) -> None:
        if self.bankruptcy_threshold is not None and self.bankruptcy_threshold < 0:
            raise ValueError("bankruptcy_threshold must be non-negative")

    @property
    def has_sweep_hooks(self) -> bool:
        return self.bankruptcy_threshold is not None or (
            self.interest is not None and self.interest.active
        )


@dataclass(frozen=True, kw_only=True)
class NoDebt(_PolicyBase):
    """Balances are bounded below by zero."""


@dataclass(frozen=True, kw_only=True)
class DebtCap(_PolicyBase):
    """Each agent may go negative down to -max_debt."""

    max_debt: float

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.max_debt > 0:
            raise ValueError("max_debt must be positive")


@dataclass(frozen=True, kw_only=True)
class ReserveRatioBank(_PolicyBase):
    """Shared bank with a required reserve ratio in (0, 1].

    Total outstanding loans are capped at monetary_base * (1 - R) / R; the
    cap is computed by make_bank from the ledger's monetary base.
    """

    reserve_ratio: float

    def __post_init__(self) -> None:
        super().__post_init__()
        if not 0 < self.reserve_ratio <= 1:
            raise ValueError("reserve_ratio must lie in (0, 1]")


@dataclass(frozen=True, kw_only=True)
class Unlimited(_PolicyBase):
    """No bound in either direction; every transfer is admissible."""


@dataclass(frozen=True, kw_only=True)
class UpperBound(_PolicyBase):
    """Balances bounded below by zero and above by max_balance."""

    max_balance: float

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.max_balance > 0:
            raise ValueError("max_balance must be positive")


@dataclass(frozen=True, kw_only=True)
class TwoSided(_PolicyBase):
    """Balances bounded in [-max_debt, max_balance]."""

    max_debt: float
    max_balance: float

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.max_debt > 0:
            raise ValueError("max_debt must be positive")
        if not self.max_balance > -self.max_debt:
            raise ValueError("max_balance must exceed -max_debt")


BoundaryPolicy = NoDebt | DebtCap | ReserveRatioBank | Unlimited | UpperBound | TwoSided


def lower_bound(policy: BoundaryPolicy) -> float:
    """Lowest admissible post-transfer payer balance (-inf if unbounded)."""
    if isinstance(policy, (NoDebt, UpperBound)):
        return 0.0
    if isinstance(policy, DebtCap):
        return -policy.max_debt
    if isinstance(policy, TwoSided):
        return -policy.max_debt
    return -np.inf


def upper_bound(policy: BoundaryPolicy) -> float:
    """Highest admissible post-transfer receiver balance (+inf if unbounded)."""
    if isinstance(policy, (UpperBound, TwoSided)):
        return policy.max_balance
    return np.inf


@dataclass
class BankState:
    """Shared bank ledger.

    ``reserves_delta`` tracks money the bank has injected into or absorbed
    from agent balances through interest and bankruptcy, signed so that
    sum(balances) + reserves_delta stays equal to the monetary base.
    """

    reserve_ratio: float = 1.0
    loan_cap: float = 0.0
    total_loans_outstanding: float = 0.0
    reserves_delta: float = 0.0


def make_bank(policy: BoundaryPolicy, monetary_base: float) -> BankState:
    if isinstance(policy, ReserveRatioBank):
        ratio = policy.reserve_ratio
        cap = monetary_base * (1.0 - ratio) / ratio
        return BankState(reserve_ratio=ratio, loan_cap=cap)
    return BankState()


def admit_transfer(
    policy: BoundaryPolicy,
    bank: BankState,
    payer_balance: float,
    receiver_balance: float,
    amount: float,
    payer_cash: float | None = None,
) -> TransferStatus:
    """Decide a proposed transfer without applying it.

    The payer-side test is written as ``payer_balance - amount >= bound`` (one
    subtraction, then compare); the engine kernels use the same expression so
    a decision here always matches a decision there bit for bit.
    """
    if isinstance(policy, Unlimited):
        return TransferStatus.EXECUTED
    if isinstance(policy, ReserveRatioBank):
        cash = max(payer_balance, 0.0) if payer_cash is None else payer_cash
        shortfall = amount - cash
        if shortfall > 0.0 and bank.total_loans_outstanding + shortfall > bank.loan_cap:
            return TransferStatus.BLOCKED_BANK_CAP
        return TransferStatus.EXECUTED
    if payer_balance - amount < lower_bound(policy):
        if isinstance(policy, (DebtCap, TwoSided)):
            return TransferStatus.BLOCKED_DEBT_CAP
        return TransferStatus.BLOCKED_INSUFFICIENT_FUNDS
    if receiver_balance + amount > upper_bound(policy):
        return TransferStatus.BLOCKED_UPPER_BOUND
    return TransferStatus.EXECUTED


@dataclass(frozen=True)
class InterestReport:
    deposit_interest: float
    loan_interest: float

    @property
    def net_injected(self) -> float:
        return self.deposit_interest - self.loan_interest


def accrue_interest(ledger, policy: BoundaryPolicy) -> InterestReport:
    """Apply one sweep of simple interest; returns what was credited/charged.

    Deposit interest is credited on positive balances (on cash for the
    reserve regime); loan interest grows negative balances (loans). The
    bank's reserves_delta absorbs the opposite side, keeping the conservation
    identity sum(balances) + reserves_delta == monetary_base exact.
    """
    rates = policy.interest
    if rates is None or not rates.active:
        return InterestReport(0.0, 0.0)
    if ledger.cash is not None:
        deposit = rates.deposit_rate * float(ledger.cash.sum())
        loan = rates.loan_rate * float(ledger.loans.sum())
        ledger.cash *= 1.0 + rates.deposit_rate
        ledger.loans *= 1.0 + rates.loan_rate
        ledger.bank.total_loans_outstanding *= 1.0 + rates.loan_rate
        np.subtract(ledger.cash, ledger.loans, out=ledger.balances)
    else:
        positive = np.maximum(ledger.balances, 0.0)
        negative = np.minimum(ledger.balances, 0.0)
        deposit = rates.deposit_rate * float(positive.sum())
        loan = rates.loan_rate * float(-negative.sum())
        np.add(
            positive * (1.0 + rates.deposit_rate),
            negative * (1.0 + rates.loan_rate),
            out=ledger.balances,
        )
    report = InterestReport(deposit_interest=deposit, loan_interest=loan)
    ledger.external_flux += report.net_injected
    ledger.bank.reserves_delta -= report.net_injected
    return report


@dataclass(frozen=True)
class BankruptcyEvent:
    agent: int
    sweep: int
    erased_debt: float


def bankruptcy_scan(ledger, policy: BoundaryPolicy, sweep: int) -> list[BankruptcyEvent]:
    """Reset agents whose balance fell below -threshold, erasing their debt.

    Runs after interest at each sweep boundary, in ascending agent order.
    Erased debt is removed from the bank's outstanding loans and logged on
    the ledger so conservation reports stay exact.
    """
    threshold = policy.bankruptcy_threshold
    if threshold is None:
        return []
    events: list[BankruptcyEvent] = []
    hit = np.flatnonzero(ledger.balances < -threshold)
    for agent in hit:
        agent = int(agent)
        erased = -float(ledger.balances[agent])
        ledger.balances[agent] = 0.0
        if ledger.cash is not None:
            # The write-off cancels the whole loan account; any remaining cash
            # is seized by the bank, so the net loss booked is loans - cash.
            ledger.bank.total_loans_outstanding -= float(ledger.loans[agent])
            ledger.cash[agent] = 0.0
            ledger.loans[agent] = 0.0
        events.append(BankruptcyEvent(agent=agent, sweep=sweep, erased_debt=erased))
        ledger.erased_debt += erased
        ledger.bank.reserves_delta -= erased
    return events
