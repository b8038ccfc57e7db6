"""Boundary policies: admission decisions, interest, bankruptcy, the bank."""

import numpy as np
import pytest

from kinex.boundaries import (
    BankState,
    DebtCap,
    InterestRates,
    NoDebt,
    ReserveRatioBank,
    TransferStatus,
    TwoSided,
    Unlimited,
    UpperBound,
    accrue_interest,
    admit_transfer,
    bankruptcy_scan,
    lower_bound,
    make_bank,
    upper_bound,
)
from kinex.ledger import SimConfig, init_ledger
from kinex.rules import UniformRandomFraction


def _bank() -> BankState:
    return BankState()


class TestBounds:
    def test_no_debt(self):
        assert lower_bound(NoDebt()) == 0.0
        assert upper_bound(NoDebt()) == np.inf

    def test_debt_cap(self):
        assert lower_bound(DebtCap(max_debt=800.0)) == -800.0

    def test_unlimited(self):
        assert lower_bound(Unlimited()) == -np.inf

    def test_upper_bound_policy(self):
        policy = UpperBound(max_balance=1500.0)
        assert lower_bound(policy) == 0.0
        assert upper_bound(policy) == 1500.0

    def test_two_sided(self):
        policy = TwoSided(max_debt=100.0, max_balance=2000.0)
        assert lower_bound(policy) == -100.0
        assert upper_bound(policy) == 2000.0


class TestAdmission:
    def test_no_debt_blocks_overdraft(self):
        status = admit_transfer(NoDebt(), _bank(), 10.0, 0.0, 10.5)
        assert status is TransferStatus.BLOCKED_INSUFFICIENT_FUNDS

    def test_no_debt_allows_exact_spend_down(self):
        status = admit_transfer(NoDebt(), _bank(), 10.0, 0.0, 10.0)
        assert status is TransferStatus.EXECUTED

    def test_no_truncation_blocked_attempt_changes_nothing(self):
        # the full amount is either moved or refused; there is no partial pay
        status = admit_transfer(NoDebt(), _bank(), 3.0, 0.0, 5.0)
        assert status is not TransferStatus.EXECUTED

    def test_debt_cap_window(self):
        policy = DebtCap(max_debt=800.0)
        assert admit_transfer(policy, _bank(), -700.0, 0.0, 100.0) is TransferStatus.EXECUTED
        assert (
            admit_transfer(policy, _bank(), -700.0, 0.0, 100.1)
            is TransferStatus.BLOCKED_DEBT_CAP
        )

    def test_unlimited_never_blocks(self):
        assert admit_transfer(Unlimited(), _bank(), -1e12, 0.0, 1e9) is TransferStatus.EXECUTED

    def test_upper_bound_blocks_receiver(self):
        policy = UpperBound(max_balance=100.0)
        assert (
            admit_transfer(policy, _bank(), 50.0, 95.0, 10.0)
            is TransferStatus.BLOCKED_UPPER_BOUND
        )
        assert admit_transfer(policy, _bank(), 50.0, 90.0, 10.0) is TransferStatus.EXECUTED

    def test_reserve_blocks_only_at_loan_cap(self):
        policy = ReserveRatioBank(reserve_ratio=0.8)
        bank = BankState(reserve_ratio=0.8, loan_cap=100.0, total_loans_outstanding=95.0)
        # shortfall 4 fits under the cap, shortfall 6 does not
        assert admit_transfer(policy, bank, 0.0, 0.0, 4.0, payer_cash=0.0) is TransferStatus.EXECUTED
        assert (
            admit_transfer(policy, bank, 0.0, 0.0, 6.0, payer_cash=0.0)
            is TransferStatus.BLOCKED_BANK_CAP
        )

    def test_reserve_cash_payment_needs_no_loan(self):
        policy = ReserveRatioBank(reserve_ratio=0.8)
        bank = BankState(reserve_ratio=0.8, loan_cap=0.0, total_loans_outstanding=0.0)
        assert admit_transfer(policy, bank, 10.0, 0.0, 10.0, payer_cash=10.0) is TransferStatus.EXECUTED


class TestBank:
    def test_loan_cap_formula(self):
        # cap = M_b (1 - R) / R: the money-multiplier headroom above the base
        bank = make_bank(ReserveRatioBank(reserve_ratio=0.8), monetary_base=500_000.0)
        assert bank.loan_cap == pytest.approx(125_000.0)
        assert bank.total_loans_outstanding == 0.0

    def test_full_reserve_means_no_lending(self):
        bank = make_bank(ReserveRatioBank(reserve_ratio=1.0), monetary_base=1e6)
        assert bank.loan_cap == 0.0

    def test_non_bank_policies_get_inert_bank(self):
        bank = make_bank(NoDebt(), monetary_base=1e6)
        assert bank.loan_cap == 0.0


def _seeded_ledger(policy, balances):
    """A ledger whose balances are overwritten but whose total still matches
    the recorded monetary base, so conservation reports stay meaningful."""
    total = float(sum(balances))
    config = SimConfig(
        num_agents=len(balances),
        initial_balance=max(total / len(balances), 1.0),
        rule=UniformRandomFraction(scale=1.0),
        boundary=policy,
        sweeps=1,
        seed=0,
    )
    ledger = init_ledger(config)
    ledger.balances[:] = balances
    ledger.monetary_base = total
    return ledger


class TestInterest:
    def _ledger(self, policy, balances):
        return _seeded_ledger(policy, balances)

    def test_deposit_interest_credits_positive_balances(self):
        policy = DebtCap(
            max_debt=100.0, interest=InterestRates(deposit_rate=0.01, loan_rate=0.0)
        )
        ledger = self._ledger(policy, [100.0, -50.0])
        report = accrue_interest(ledger, policy)
        assert ledger.balances[0] == pytest.approx(101.0)
        assert ledger.balances[1] == pytest.approx(-50.0)
        assert report.deposit_interest == pytest.approx(1.0)
        assert ledger.external_flux == pytest.approx(1.0)

    def test_loan_interest_grows_debt(self):
        policy = DebtCap(
            max_debt=1000.0, interest=InterestRates(deposit_rate=0.0, loan_rate=0.02)
        )
        ledger = self._ledger(policy, [100.0, -50.0])
        report = accrue_interest(ledger, policy)
        assert ledger.balances[1] == pytest.approx(-51.0)
        assert report.loan_interest == pytest.approx(1.0)
        assert ledger.external_flux == pytest.approx(-1.0)

    def test_conservation_tracks_injected_interest(self):
        from kinex.ledger import conservation_report

        policy = DebtCap(
            max_debt=1000.0, interest=InterestRates(deposit_rate=0.01, loan_rate=0.02)
        )
        ledger = self._ledger(policy, [100.0, -50.0])
        accrue_interest(ledger, policy)
        _, _, drift = conservation_report(ledger)
        assert drift < 1e-12


class TestBankruptcy:
    def _ledger(self, policy, balances):
        return _seeded_ledger(policy, balances)

    def test_threshold_trigger_and_reset(self):
        policy = DebtCap(max_debt=1000.0, bankruptcy_threshold=500.0)
        ledger = self._ledger(policy, [100.0, -600.0, -499.0])
        events = bankruptcy_scan(ledger, policy, sweep=7)
        assert [e.agent for e in events] == [1]
        assert events[0].sweep == 7
        assert ledger.balances[1] == 0.0
        assert ledger.balances[2] == -499.0
        assert ledger.erased_debt == pytest.approx(600.0)

    def test_no_threshold_means_no_scan(self):
        policy = DebtCap(max_debt=1000.0)
        ledger = self._ledger(policy, [900.0, -900.0])
        assert bankruptcy_scan(ledger, policy, sweep=0) == []

    def test_conservation_after_write_off(self):
        from kinex.ledger import conservation_report

        policy = DebtCap(max_debt=1000.0, bankruptcy_threshold=100.0)
        ledger = self._ledger(policy, [300.0, -200.0])
        bankruptcy_scan(ledger, policy, sweep=1)
        _, _, drift = conservation_report(ledger)
        assert drift < 1e-12

    def test_ascending_order(self):
        policy = DebtCap(max_debt=1000.0, bankruptcy_threshold=100.0)
        ledger = self._ledger(policy, [-300.0, 10.0, -200.0])
        events = bankruptcy_scan(ledger, policy, sweep=0)
        assert [e.agent for e in events] == [0, 2]


class TestSweepHooks:
    def test_plain_policies_have_no_hooks(self):
        assert not NoDebt().has_sweep_hooks
        assert not DebtCap(max_debt=10.0).has_sweep_hooks

    def test_interest_or_bankruptcy_enables_hooks(self):
        assert DebtCap(
            max_debt=10.0, interest=InterestRates(deposit_rate=0.01, loan_rate=0.0)
        ).has_sweep_hooks
        assert DebtCap(max_debt=10.0, bankruptcy_threshold=5.0).has_sweep_hooks
