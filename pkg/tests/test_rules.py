"""Exchange rule construction, transfer amounts, and the saving trade."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinex.rules import (
    FixedAmount,
    Multiplicative,
    RandomSavingPropensity,
    SavingPropensity,
    UniformRandomFraction,
    amount_fixed,
    amount_multiplicative,
    amount_uniform_random,
    draw_saving_propensities,
    is_saving_rule,
    saving_exchange,
)


class TestConstruction:
    def test_fixed_amount_requires_positive(self):
        with pytest.raises(ValueError):
            FixedAmount(amount=0.0)
        with pytest.raises(ValueError):
            FixedAmount(amount=-1.0)

    def test_multiplicative_fraction_open_interval(self):
        with pytest.raises(ValueError):
            Multiplicative(fraction=0.0)
        with pytest.raises(ValueError):
            Multiplicative(fraction=1.0)
        assert Multiplicative(fraction=0.5).fraction == 0.5

    def test_saving_propensity_half_open(self):
        assert SavingPropensity(propensity=0.0).propensity == 0.0
        with pytest.raises(ValueError):
            SavingPropensity(propensity=1.0)
        with pytest.raises(ValueError):
            SavingPropensity(propensity=-0.1)

    def test_random_saving_cap_below_one(self):
        assert RandomSavingPropensity().propensity_max == 1.0 - 1e-4
        with pytest.raises(ValueError):
            RandomSavingPropensity(propensity_max=1.0)

    def test_is_saving_rule(self):
        assert is_saving_rule(SavingPropensity(propensity=0.3))
        assert is_saving_rule(RandomSavingPropensity())
        assert not is_saving_rule(FixedAmount(amount=1.0))
        assert not is_saving_rule(UniformRandomFraction())


class TestAmounts:
    def test_fixed(self):
        assert amount_fixed(FixedAmount(amount=2.5)) == 2.5

    def test_uniform_random_scale_default_is_mean_money(self):
        rng = np.random.default_rng(3)
        rule = UniformRandomFraction()
        draws = [amount_uniform_random(rule, 1000.0, rng) for _ in range(2000)]
        assert 0.0 <= min(draws) and max(draws) < 1000.0
        assert abs(np.mean(draws) - 500.0) < 20.0

    def test_uniform_random_explicit_scale(self):
        rng = np.random.default_rng(4)
        rule = UniformRandomFraction(scale=10.0)
        draws = [amount_uniform_random(rule, 1000.0, rng) for _ in range(500)]
        assert max(draws) < 10.0

    def test_multiplicative_proportional(self):
        assert amount_multiplicative(Multiplicative(fraction=0.25), 400.0) == 100.0

    def test_multiplicative_rejects_negative_balance(self):
        with pytest.raises(ValueError):
            amount_multiplicative(Multiplicative(fraction=0.25), -1.0)


class TestSavingExchange:
    def test_full_propensity_is_a_no_op(self):
        ni, nj = saving_exchange(70.0, 30.0, 1.0, 1.0, 0.77)
        assert ni == 70.0 and nj == 30.0

    def test_zero_propensity_redistributes_everything(self):
        ni, nj = saving_exchange(70.0, 30.0, 0.0, 0.0, 0.5)
        assert ni == 50.0 and nj == 50.0

    def test_split_one_takes_whole_pool(self):
        ni, nj = saving_exchange(100.0, 100.0, 0.5, 0.5, 1.0)
        assert ni == pytest.approx(150.0)
        assert nj == pytest.approx(50.0)

    @settings(max_examples=200, deadline=None)
    @given(
        bi=st.floats(0, 1e6),
        bj=st.floats(0, 1e6),
        li=st.floats(0, 1 - 1e-4),
        lj=st.floats(0, 1 - 1e-4),
        split=st.floats(0, 1),
    )
    def test_pair_sum_conserved_to_1e12(self, bi, bj, li, lj, split):
        ni, nj = saving_exchange(bi, bj, li, lj, split)
        assert abs((ni + nj) - (bi + bj)) <= 1e-12 * max(1.0, bi + bj)

    @settings(max_examples=200, deadline=None)
    @given(
        bi=st.floats(0, 1e6),
        bj=st.floats(0, 1e6),
        li=st.floats(0, 1 - 1e-4),
        lj=st.floats(0, 1 - 1e-4),
        split=st.floats(0, 1),
    )
    def test_both_sides_keep_their_savings(self, bi, bj, li, lj, split):
        ni, nj = saving_exchange(bi, bj, li, lj, split)
        assert ni >= li * bi - 1e-9 * max(1.0, bi)
        assert nj >= lj * bj - 1e-9 * max(1.0, bi + bj)


class TestPropensityDraws:
    def test_random_rule_draws_in_range(self):
        rng = np.random.default_rng(7)
        lam = draw_saving_propensities(RandomSavingPropensity(), 10_000, rng)
        assert lam.shape == (10_000,)
        assert lam.min() >= 0.0
        assert lam.max() < 1.0 - 1e-4
        assert abs(lam.mean() - 0.5 * (1 - 1e-4)) < 0.01

    def test_constant_rule_consumes_no_randomness(self):
        rng_a = np.random.default_rng(11)
        rng_b = np.random.default_rng(11)
        lam = draw_saving_propensities(SavingPropensity(propensity=0.25), 50, rng_a)
        assert np.all(lam == 0.25)
        assert rng_a.random() == rng_b.random()

    def test_non_saving_rules_get_zeros(self):
        rng = np.random.default_rng(13)
        lam = draw_saving_propensities(UniformRandomFraction(), 5, rng)
        assert np.all(lam == 0.0)
