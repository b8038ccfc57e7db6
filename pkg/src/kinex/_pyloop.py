"""Pure-Python sweep kernels (reference implementation).

The compiled extension (_speedups) implements exactly these loops with the
same arithmetic expressions and the same pre-drawn random blocks, so both
engines produce bit-identical trajectories. Keep the two files in sync: any
change here must be mirrored there.

Kernel contract
---------------
The engine pre-draws, per block of attempts, in this order:
  pay[t]  : payer index, uniform on [0, n)
  recv[t] : raw receiver index, uniform on [0, n-1); the kernel maps it to
            a receiver != payer by adding 1 when recv[t] >= pay[t]
  u[t]    : uniform on [0, 1), consumed by the rule (always drawn)
and for the reserve kernel additionally pay2/recv2/u2 for the refinance
channel. Kernels consume these sequentially and mutate balances in place.

counts layout (int64[5]): executed, blocked_floor, blocked_ceiling,
blocked_bank, refinanced.
"""

from __future__ import annotations

import numpy as np

RULE_FIXED = 0
RULE_UNIFRAC = 1
RULE_MULT = 2
RULE_SAVE = 3
RULE_SAVE_RANDOM = 4

N_EXECUTED = 0
N_BLOCKED_FLOOR = 1
N_BLOCKED_CEILING = 2
N_BLOCKED_BANK = 3
N_REFINANCED = 4


def run_block(
    balances: np.ndarray,
    pay: np.ndarray,
    recv: np.ndarray,
    u: np.ndarray,
    rule_kind: int,
    rule_param: float,
    propensities: np.ndarray,
    floor_bound: float,
    ceil_bound: float,
    counts: np.ndarray,
) -> None:
    """Run one block of trade attempts for the single-balance regimes."""
    n = balances.shape[0]
    for t in range(pay.shape[0]):
        i = int(pay[t])
        j = int(recv[t])
        if j >= i:
            j += 1
        bi = float(balances[i])
        bj = float(balances[j])
        if rule_kind >= RULE_SAVE:
            if rule_kind == RULE_SAVE:
                li = rule_param
                lj = rule_param
            else:
                li = float(propensities[i])
                lj = float(propensities[j])
            pool = (1.0 - li) * bi + (1.0 - lj) * bj
            ni = li * bi + float(u[t]) * pool
            nj = (bi + bj) - ni
            if nj < floor_bound or ni < floor_bound:
                counts[N_BLOCKED_FLOOR] += 1
            else:
                balances[i] = ni
                balances[j] = nj
                counts[N_EXECUTED] += 1
            continue
        if rule_kind == RULE_FIXED:
            amount = rule_param
        elif rule_kind == RULE_UNIFRAC:
            amount = float(u[t]) * rule_param
        else:
            amount = rule_param * bi
        left = bi - amount
        if left < floor_bound:
            counts[N_BLOCKED_FLOOR] += 1
        elif bj + amount > ceil_bound:
            counts[N_BLOCKED_CEILING] += 1
        else:
            balances[i] = left
            balances[j] = bj + amount
            counts[N_EXECUTED] += 1


def run_block_reserve(
    balances: np.ndarray,
    cash: np.ndarray,
    loans: np.ndarray,
    pay: np.ndarray,
    recv: np.ndarray,
    u: np.ndarray,
    pay2: np.ndarray,
    recv2: np.ndarray,
    u2: np.ndarray,
    rule_kind: int,
    rule_param: float,
    loan_cap: float,
    bank_total: np.ndarray,
    counts: np.ndarray,
) -> None:
    """Run one block under the reserve-ratio bank (two-account regime).

    Payments come out of cash; a shortfall is borrowed from the bank unless
    that would push total outstanding loans past loan_cap. Each attempt is
    followed by one refinance draw: agent k repays x of their loan from cash
    while agent l takes out a fresh loan of x, with x = u2 * (outstanding/n).
    Refinancing changes no net balance and no aggregate; it only keeps the
    assignment of debt to agents mixing once the bank is at its cap.
    """
    n = balances.shape[0]
    total = float(bank_total[0])
    for t in range(pay.shape[0]):
        i = int(pay[t])
        j = int(recv[t])
        if j >= i:
            j += 1
        if rule_kind == RULE_FIXED:
            amount = rule_param
        else:
            amount = float(u[t]) * rule_param
        shortfall = amount - float(cash[i])
        if shortfall > 0.0:
            if total + shortfall > loan_cap:
                counts[N_BLOCKED_BANK] += 1
            else:
                loans[i] = loans[i] + shortfall
                total = total + shortfall
                cash[i] = 0.0
                cash[j] = cash[j] + amount
                balances[i] = cash[i] - loans[i]
                balances[j] = cash[j] - loans[j]
                counts[N_EXECUTED] += 1
        else:
            cash[i] = cash[i] - amount
            cash[j] = cash[j] + amount
            balances[i] = cash[i] - loans[i]
            balances[j] = cash[j] - loans[j]
            counts[N_EXECUTED] += 1

        k = int(pay2[t])
        l = int(recv2[t])
        if l >= k:
            l += 1
        x = float(u2[t]) * (total / n)
        if x > 0.0 and float(cash[k]) >= x and float(loans[k]) >= x:
            cash[k] = cash[k] - x
            loans[k] = loans[k] - x
            cash[l] = cash[l] + x
            loans[l] = loans[l] + x
            balances[k] = cash[k] - loans[k]
            balances[l] = cash[l] - loans[l]
            counts[N_REFINANCED] += 1
    bank_total[0] = total
