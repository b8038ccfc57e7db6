# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sweep kernels.

Exact transliteration of kinex._pyloop — same kernel contract, same
arithmetic expressions in the same order, so trajectories are bit-identical
across the two engines (the build disables FMA contraction to keep float
rounding aligned). Any semantic change must be made in both files.

Both kernels release the GIL, so independent replicates can run on a thread
pool without serializing.
"""

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
    double[::1] balances,
    const long long[::1] pay,
    const long long[::1] recv,
    const double[::1] u,
    int rule_kind,
    double rule_param,
    const double[::1] propensities,
    double floor_bound,
    double ceil_bound,
    long long[::1] counts,
):
    """Run one block of trade attempts for the single-balance regimes."""
    cdef Py_ssize_t nattempts = pay.shape[0]
    cdef Py_ssize_t t, i, j
    cdef double bi, bj, li, lj, pool, ni, nj, amount, left
    cdef long long executed = 0, blocked_floor = 0, blocked_ceiling = 0
    with nogil:
        for t in range(nattempts):
            i = <Py_ssize_t> pay[t]
            j = <Py_ssize_t> recv[t]
            if j >= i:
                j += 1
            bi = balances[i]
            bj = balances[j]
            if rule_kind >= 3:  # saving-propensity rules
                if rule_kind == 3:
                    li = rule_param
                    lj = rule_param
                else:
                    li = propensities[i]
                    lj = propensities[j]
                pool = (1.0 - li) * bi + (1.0 - lj) * bj
                ni = li * bi + u[t] * pool
                nj = (bi + bj) - ni
                if nj < floor_bound or ni < floor_bound:
                    blocked_floor += 1
                else:
                    balances[i] = ni
                    balances[j] = nj
                    executed += 1
                continue
            if rule_kind == 0:
                amount = rule_param
            elif rule_kind == 1:
                amount = u[t] * rule_param
            else:
                amount = rule_param * bi
            left = bi - amount
            if left < floor_bound:
                blocked_floor += 1
            elif bj + amount > ceil_bound:
                blocked_ceiling += 1
            else:
                balances[i] = left
                balances[j] = bj + amount
                executed += 1
    counts[N_EXECUTED] += executed
    counts[N_BLOCKED_FLOOR] += blocked_floor
    counts[N_BLOCKED_CEILING] += blocked_ceiling


def run_block_reserve(
    double[::1] balances,
    double[::1] cash,
    double[::1] loans,
    const long long[::1] pay,
    const long long[::1] recv,
    const double[::1] u,
    const long long[::1] pay2,
    const long long[::1] recv2,
    const double[::1] u2,
    int rule_kind,
    double rule_param,
    double loan_cap,
    double[::1] bank_total,
    long long[::1] counts,
):
    """Run one block under the reserve-ratio bank (two-account regime)."""
    cdef Py_ssize_t nattempts = pay.shape[0]
    cdef Py_ssize_t n = balances.shape[0]
    cdef Py_ssize_t t, i, j, k, l
    cdef double amount, shortfall, x, total
    cdef long long executed = 0, blocked_bank = 0, refinanced = 0
    total = bank_total[0]
    with nogil:
        for t in range(nattempts):
            i = <Py_ssize_t> pay[t]
            j = <Py_ssize_t> recv[t]
            if j >= i:
                j += 1
            if rule_kind == 0:
                amount = rule_param
            else:
                amount = u[t] * rule_param
            shortfall = amount - cash[i]
            if shortfall > 0.0:
                if total + shortfall > loan_cap:
                    blocked_bank += 1
                else:
                    loans[i] = loans[i] + shortfall
                    total = total + shortfall
                    cash[i] = 0.0
                    cash[j] = cash[j] + amount
                    balances[i] = cash[i] - loans[i]
                    balances[j] = cash[j] - loans[j]
                    executed += 1
            else:
                cash[i] = cash[i] - amount
                cash[j] = cash[j] + amount
                balances[i] = cash[i] - loans[i]
                balances[j] = cash[j] - loans[j]
                executed += 1

            k = <Py_ssize_t> pay2[t]
            l = <Py_ssize_t> recv2[t]
            if l >= k:
                l += 1
            x = u2[t] * (total / n)
            if x > 0.0 and cash[k] >= x and loans[k] >= x:
                cash[k] = cash[k] - x
                loans[k] = loans[k] - x
                cash[l] = cash[l] + x
                loans[l] = loans[l] + x
                balances[k] = cash[k] - loans[k]
                balances[l] = cash[l] - loans[l]
                refinanced += 1
    bank_total[0] = total
    counts[N_EXECUTED] += executed
    counts[N_BLOCKED_BANK] += blocked_bank
    counts[N_REFINANCED] += refinanced
