"""Ledger initialisation, single-transfer semantics, and conservation."""

import numpy as np
import pytest

from kinex.boundaries import (
    DebtCap,
    InterestRates,
    NoDebt,
    ReserveRatioBank,
    TransferStatus,
    Unlimited,
)
from kinex.ledger import (
    ConfigError,
    SimConfig,
    attempt_transfer,
    conservation_report,
    init_ledger,
    validate_config,
)
from kinex.rules import (
    FixedAmount,
    Multiplicative,
    SavingPropensity,
    UniformRandomFraction,
)


def _config(**overrides) -> SimConfig:
    base = dict(
        num_agents=4,
        initial_balance=100.0,
        rule=UniformRandomFraction(scale=1.0),
        boundary=NoDebt(),
        sweeps=10,
        seed=1,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestValidation:
    def test_good_config_passes(self):
        validate_config(_config())

    @pytest.mark.parametrize(
        "overrides, field",
        [
            (dict(num_agents=1), "num_agents"),
            (dict(initial_balance=-1.0), "initial_balance"),
            (dict(initial_balance=np.nan), "initial_balance"),
            (dict(sweeps=-1), "sweeps"),
            (dict(snapshot_every=0), "snapshot_every"),
            (dict(initial_balance=0.0), "bin_width"),
            (dict(bin_width=0.0), "bin_width"),
            (
                dict(rule=Multiplicative(fraction=0.5), boundary=DebtCap(max_debt=10.0)),
                "rule",
            ),
            (
                dict(
                    rule=SavingPropensity(propensity=0.5),
                    boundary=DebtCap(max_debt=10.0),
                ),
                "rule",
            ),
            (dict(integer_mode=True), "integer_mode"),  # rule is not fixed-amount
            (
                dict(integer_mode=True, rule=FixedAmount(amount=1.5)),
                "integer_mode",
            ),
            (
                dict(
                    integer_mode=True,
                    rule=FixedAmount(amount=1.0),
                    initial_balance=10.25,
                ),
                "integer_mode",
            ),
            (
                dict(
                    integer_mode=True,
                    rule=FixedAmount(amount=1.0),
                    boundary=DebtCap(max_debt=10.5),
                ),
                "integer_mode",
            ),
            (
                dict(
                    integer_mode=True,
                    rule=FixedAmount(amount=1.0),
                    boundary=NoDebt(
                        interest=InterestRates(deposit_rate=0.01, loan_rate=0.0)
                    ),
                ),
                "integer_mode",
            ),
        ],
    )
    def test_bad_configs_name_the_field(self, overrides, field):
        with pytest.raises(ConfigError) as excinfo:
            validate_config(_config(**overrides))
        assert excinfo.value.field == field

    def test_zero_initial_balance_needs_explicit_bins(self):
        validate_config(_config(initial_balance=0.0, bin_width=5.0))

    def test_integer_mode_accepts_integral_setup(self):
        validate_config(
            _config(integer_mode=True, rule=FixedAmount(amount=1.0), initial_balance=50.0)
        )


class TestInit:
    def test_uniform_start(self):
        ledger = init_ledger(_config())
        assert np.all(ledger.balances == 100.0)
        assert ledger.monetary_base == pytest.approx(400.0)
        assert ledger.transaction_count == 0
        assert ledger.cash is None and ledger.loans is None

    def test_reserve_regime_gets_accounts(self):
        ledger = init_ledger(_config(boundary=ReserveRatioBank(reserve_ratio=0.8)))
        assert np.array_equal(ledger.cash, ledger.balances)
        assert np.all(ledger.loans == 0.0)
        # cap = base (1 - R) / R = 400 * 0.2 / 0.8
        assert ledger.bank.loan_cap == pytest.approx(100.0)

    def test_init_validates(self):
        with pytest.raises(ConfigError):
            init_ledger(_config(num_agents=0))


class TestAttempt:
    def test_executed_moves_full_amount(self):
        ledger = init_ledger(_config())
        outcome = attempt_transfer(ledger, NoDebt(), 0, 1, 30.0)
        assert outcome.executed
        assert outcome.status is TransferStatus.EXECUTED
        assert ledger.balances[0] == pytest.approx(70.0)
        assert ledger.balances[1] == pytest.approx(130.0)
        assert ledger.transaction_count == 1

    def test_blocked_leaves_balances_but_counts_time(self):
        ledger = init_ledger(_config())
        before = ledger.balances.copy()
        outcome = attempt_transfer(ledger, NoDebt(), 0, 1, 100.5)
        assert not outcome.executed
        assert outcome.status is TransferStatus.BLOCKED_INSUFFICIENT_FUNDS
        assert np.array_equal(ledger.balances, before)
        assert ledger.transaction_count == 1

    @pytest.mark.parametrize("payer, receiver", [(-1, 0), (4, 0), (0, -1), (0, 4)])
    def test_index_errors(self, payer, receiver):
        ledger = init_ledger(_config())
        with pytest.raises(IndexError):
            attempt_transfer(ledger, NoDebt(), payer, receiver, 1.0)

    def test_self_transfer_rejected(self):
        ledger = init_ledger(_config())
        with pytest.raises(ValueError):
            attempt_transfer(ledger, NoDebt(), 2, 2, 1.0)

    @pytest.mark.parametrize("amount", [-1.0, np.nan, np.inf])
    def test_bad_amounts_rejected(self, amount):
        ledger = init_ledger(_config())
        with pytest.raises(ValueError):
            attempt_transfer(ledger, NoDebt(), 0, 1, amount)

    def test_rejected_calls_do_not_count_time(self):
        ledger = init_ledger(_config())
        with pytest.raises(ValueError):
            attempt_transfer(ledger, NoDebt(), 0, 1, -1.0)
        assert ledger.transaction_count == 0

    def test_debt_allowed_under_cap(self):
        policy = DebtCap(max_debt=50.0)
        ledger = init_ledger(_config(boundary=policy))
        outcome = attempt_transfer(ledger, policy, 0, 1, 150.0)
        assert outcome.executed
        assert ledger.balances[0] == pytest.approx(-50.0)

    def test_unlimited_goes_arbitrarily_negative(self):
        policy = Unlimited()
        ledger = init_ledger(_config(boundary=policy))
        assert attempt_transfer(ledger, policy, 0, 1, 1e6).executed
        assert ledger.balances[0] == pytest.approx(100.0 - 1e6)


class TestReservePath:
    def _ledger(self):
        policy = ReserveRatioBank(reserve_ratio=0.8)
        return init_ledger(_config(boundary=policy)), policy

    def test_cash_payment_uses_no_loan(self):
        ledger, policy = self._ledger()
        outcome = attempt_transfer(ledger, policy, 0, 1, 40.0)
        assert outcome.executed
        assert ledger.cash[0] == pytest.approx(60.0)
        assert ledger.loans[0] == 0.0
        assert ledger.cash[1] == pytest.approx(140.0)
        assert ledger.bank.total_loans_outstanding == 0.0

    def test_shortfall_is_borrowed(self):
        ledger, policy = self._ledger()
        outcome = attempt_transfer(ledger, policy, 0, 1, 130.0)
        assert outcome.executed
        assert ledger.cash[0] == 0.0
        assert ledger.loans[0] == pytest.approx(30.0)
        assert ledger.balances[0] == pytest.approx(-30.0)
        assert ledger.cash[1] == pytest.approx(230.0)
        assert ledger.bank.total_loans_outstanding == pytest.approx(30.0)

    def test_block_at_bank_cap(self):
        ledger, policy = self._ledger()
        # cap = 400 * 0.2 / 0.8 = 100; exhaust it, then one more must fail
        ledger.bank.total_loans_outstanding = 99.0
        outcome = attempt_transfer(ledger, policy, 0, 1, 102.0)
        assert outcome.status is TransferStatus.BLOCKED_BANK_CAP
        assert ledger.cash[0] == pytest.approx(100.0)
        assert ledger.loans[0] == 0.0

    def test_net_balance_is_cash_minus_loans(self):
        ledger, policy = self._ledger()
        attempt_transfer(ledger, policy, 0, 1, 130.0)
        attempt_transfer(ledger, policy, 1, 0, 10.0)
        np.testing.assert_allclose(ledger.balances, ledger.cash - ledger.loans)

    def test_lending_conserves_net_money(self):
        ledger, policy = self._ledger()
        attempt_transfer(ledger, policy, 0, 1, 130.0)
        attempt_transfer(ledger, policy, 2, 3, 170.0)
        _, _, drift = conservation_report(ledger)
        assert drift < 1e-12
        # loans expand gross cash but never the net total
        assert ledger.cash.sum() == pytest.approx(
            ledger.monetary_base + ledger.loans.sum()
        )


class TestConservation:
    def test_fresh_ledger_balances_exactly(self):
        expected, actual, drift = conservation_report(init_ledger(_config()))
        assert expected == actual == 400.0
        assert drift == 0.0

    def test_many_transfers_stay_exact(self):
        ledger = init_ledger(_config(num_agents=10))
        rng = np.random.default_rng(42)
        policy = NoDebt()
        for _ in range(2000):
            i, j = rng.choice(10, size=2, replace=False)
            attempt_transfer(ledger, policy, int(i), int(j), float(rng.random() * 50))
        _, _, drift = conservation_report(ledger)
        assert drift < 1e-12
