"""Pairwise exchange rules.

A rule decides how much money changes hands when an ordered pair of agents
(payer, receiver) meets. Additive rules produce a single transfer amount; the
saving-propensity rules instead reshuffle the pair's combined money and are
handled as a joint update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FixedAmount",
    "UniformRandomFraction",
    "Multiplicative",
    "SavingPropensity",
    "RandomSavingPropensity",
    "ExchangeRule",
    "amount_fixed",
    "amount_uniform_random",
    "amount_multiplicative",
    "saving_exchange",
    "draw_saving_propensities",
    "is_saving_rule",
]


@dataclass(frozen=True)
class FixedAmount:
    """Transfer a constant amount per trade."""

    amount: float

    def __post_init__(self) -> None:
        if not self.amount > 0:
            raise ValueError("amount must be positive")


@dataclass(frozen=True)
class UniformRandomFraction:
    """Transfer u * scale with u ~ U(0, 1).

    scale=None means "use the mean money per agent", resolved by the engine at
    run start (total money is conserved between interest events, so the mean
    is constant within a run segment).
    """

    scale: float | None = None

    def __post_init__(self) -> None:
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be positive when given")


@dataclass(frozen=True)
class Multiplicative:
    """Transfer a fixed fraction of the payer's current balance."""

    fraction: float

    def __post_init__(self) -> None:
        if not 0 < self.fraction < 1:
            raise ValueError("fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SavingPropensity:
    """Each agent keeps a fixed fraction of their money; the rest is pooled
    and split uniformly at random between the pair."""

    propensity: float

    def __post_init__(self) -> None:
        if not 0 <= self.propensity < 1:
            raise ValueError("propensity must lie in [0, 1)")


@dataclass(frozen=True)
class RandomSavingPropensity:
    """Like SavingPropensity, but each agent draws a personal propensity
    uniformly from [0, propensity_max) once at run start and keeps it."""

    propensity_max: float = 1.0 - 1e-4

    def __post_init__(self) -> None:
        if not 0 < self.propensity_max < 1:
            raise ValueError("propensity_max must lie in (0, 1)")


ExchangeRule = (
    FixedAmount
    | UniformRandomFraction
    | Multiplicative
    | SavingPropensity
    | RandomSavingPropensity
)


def is_saving_rule(rule: ExchangeRule) -> bool:
    return isinstance(rule, (SavingPropensity, RandomSavingPropensity))


def amount_fixed(rule: FixedAmount, payer_balance: float | None = None) -> float:
    return rule.amount


def amount_uniform_random(
    rule: UniformRandomFraction, mean_money: float, rng: np.random.Generator
) -> float:
    scale = mean_money if rule.scale is None else rule.scale
    return float(rng.random()) * scale


def amount_multiplicative(rule: Multiplicative, payer_balance: float) -> float:
    if payer_balance < 0:
        raise ValueError("multiplicative rule requires a non-negative payer balance")
    return rule.fraction * payer_balance


def saving_exchange(
    balance_i: float,
    balance_j: float,
    propensity_i: float,
    propensity_j: float,
    split: float,
) -> tuple[float, float]:
    """Joint update for a saving-propensity trade.

    Agent i keeps propensity_i of their money, j likewise; the two released
    parts are pooled and agent i receives the fraction ``split`` of the pool.
    The pair sum is preserved by construction (j gets the exact remainder).
    """
    pool = (1.0 - propensity_i) * balance_i + (1.0 - propensity_j) * balance_j
    new_i = propensity_i * balance_i + split * pool
    new_j = (balance_i + balance_j) - new_i
    return new_i, new_j


def draw_saving_propensities(
    rule: ExchangeRule, num_agents: int, rng: np.random.Generator
) -> np.ndarray:
    """Per-agent propensity vector used by the engine for saving rules."""
    if isinstance(rule, RandomSavingPropensity):
        return rng.random(num_agents) * rule.propensity_max
    if isinstance(rule, SavingPropensity):
        return np.full(num_agents, rule.propensity, dtype=np.float64)
    return np.zeros(num_agents, dtype=np.float64)
