"""The compiled and pure-Python kernels must replay identical trajectories."""

import numpy as np
import pytest

from kinex.boundaries import (
    DebtCap,
    NoDebt,
    ReserveRatioBank,
    TwoSided,
    Unlimited,
    UpperBound,
)
from kinex.engine import available_engines, run_simulation
from kinex.ledger import SimConfig, conservation_report
from kinex.rules import (
    FixedAmount,
    Multiplicative,
    RandomSavingPropensity,
    SavingPropensity,
    UniformRandomFraction,
)

BOTH_ENGINES = "compiled" in available_engines()
needs_compiled = pytest.mark.skipif(
    not BOTH_ENGINES, reason="compiled kernel not built"
)

REGIMES = {
    "uniform-nodebt": dict(rule=UniformRandomFraction(), boundary=NoDebt()),
    "uniform-debtcap": dict(
        rule=UniformRandomFraction(), boundary=DebtCap(max_debt=40.0)
    ),
    "uniform-unlimited": dict(rule=UniformRandomFraction(), boundary=Unlimited()),
    "uniform-upperbound": dict(
        rule=UniformRandomFraction(), boundary=UpperBound(max_balance=300.0)
    ),
    "uniform-twosided": dict(
        rule=UniformRandomFraction(),
        boundary=TwoSided(max_debt=40.0, max_balance=300.0),
    ),
    "uniform-reserve": dict(
        rule=UniformRandomFraction(), boundary=ReserveRatioBank(reserve_ratio=0.8)
    ),
    "fixed-nodebt": dict(rule=FixedAmount(amount=1.0), boundary=NoDebt()),
    "fixed-integer": dict(
        rule=FixedAmount(amount=1.0), boundary=NoDebt(), integer_mode=True
    ),
    "multiplicative-nodebt": dict(
        rule=Multiplicative(fraction=1.0 / 3.0), boundary=NoDebt()
    ),
    "saving-nodebt": dict(rule=SavingPropensity(propensity=0.5), boundary=NoDebt()),
    "random-saving-nodebt": dict(rule=RandomSavingPropensity(), boundary=NoDebt()),
}


def _config(regime: str, **overrides) -> SimConfig:
    base = dict(
        num_agents=50,
        initial_balance=100.0,
        sweeps=200,
        seed=12345,
        snapshot_every=50,
    )
    base.update(REGIMES[regime])
    base.update(overrides)
    return SimConfig(**base)


@needs_compiled
@pytest.mark.parametrize("regime", sorted(REGIMES))
def test_engines_agree_bit_for_bit(regime):
    py = run_simulation(_config(regime), engine="python")
    cc = run_simulation(_config(regime), engine="compiled")
    assert np.array_equal(py.final_balances, cc.final_balances)
    assert py.counts == cc.counts
    assert len(py.histograms) == len(cc.histograms)
    for hp, hc in zip(py.histograms, cc.histograms):
        assert hp.origin == hc.origin
        assert np.array_equal(hp.counts, hc.counts)


@needs_compiled
def test_reserve_accounts_agree_bit_for_bit(regime="uniform-reserve"):
    py = run_simulation(_config(regime), engine="python")
    cc = run_simulation(_config(regime), engine="compiled")
    assert np.array_equal(py.ledger.cash, cc.ledger.cash)
    assert np.array_equal(py.ledger.loans, cc.ledger.loans)
    assert py.ledger.bank.total_loans_outstanding == pytest.approx(
        cc.ledger.bank.total_loans_outstanding, abs=1e-9
    )


@pytest.mark.parametrize("engine", ["python", "compiled"])
def test_same_seed_same_trajectory(engine):
    if engine == "compiled" and not BOTH_ENGINES:
        pytest.skip("compiled kernel not built")
    a = run_simulation(_config("uniform-debtcap"), engine=engine)
    b = run_simulation(_config("uniform-debtcap"), engine=engine)
    assert np.array_equal(a.final_balances, b.final_balances)
    assert a.counts == b.counts


def test_different_seeds_differ():
    a = run_simulation(_config("uniform-nodebt"), engine="python")
    b = run_simulation(_config("uniform-nodebt", seed=999), engine="python")
    assert not np.array_equal(a.final_balances, b.final_balances)


@pytest.mark.parametrize(
    "regime", ["uniform-nodebt", "uniform-debtcap", "saving-nodebt", "uniform-reserve"]
)
def test_conservation_after_run(regime):
    result = run_simulation(_config(regime), engine="python")
    _, _, drift = conservation_report(result.ledger)
    assert drift < 1e-12
    if result.ledger.cash is not None:
        np.testing.assert_allclose(
            result.ledger.balances,
            result.ledger.cash - result.ledger.loans,
            atol=1e-9,
        )


def test_integer_mode_keeps_integer_balances():
    result = run_simulation(_config("fixed-integer"), engine="python")
    assert np.all(result.final_balances == np.round(result.final_balances))
    assert np.all(result.final_balances >= 0)


def test_snapshot_schedule():
    result = run_simulation(_config("uniform-nodebt"), engine="python")
    assert [h.sweep for h in result.histograms] == [0, 50, 100, 150, 200]
    assert result.counts["attempts"] == 200 * 50


def test_blocked_attempts_are_counted():
    # one fixed transfer per attempt against a cap low enough to block often
    config = _config("fixed-nodebt", initial_balance=2.0, sweeps=100)
    result = run_simulation(config, engine="python")
    blocked = sum(v for k, v in result.counts.items() if k.startswith("blocked"))
    assert blocked > 0
    assert result.counts["executed"] + blocked == result.counts["attempts"]


def test_propensities_returned_only_for_random_saving():
    with_draw = run_simulation(_config("random-saving-nodebt"), engine="python")
    assert with_draw.propensities is not None
    assert with_draw.propensities.shape == (50,)
    without = run_simulation(_config("saving-nodebt"), engine="python")
    assert without.propensities is None
