"""Mean-field kinetic equation on a money grid.

Evolves the one-agent money distribution directly: a well-mixed population
exchanges amounts drawn from a per-payer transition kernel, giving a
quadratic master equation

    dP(m)/dt = sum over (payer, receiver, delta) of
               [ gain into m ] - [ loss out of m ]

with both the payer-side and receiver-side flows of each event counted.
Blocked events (payer below the floor, receiver past the grid top) do not
happen, mirroring the Monte Carlo engine's blocked transfers. The grid top
is a truncation artifact unless ``bounded_above`` says otherwise, so the
would-be flow past it is monitored as leakage and the range auto-doubles
when the accumulated leak exceeds a budget.

The same flow computation backs single steps (forward Euler with a
stability guard), the stationary solver (adaptive dt, residual = max rate
of change), and the exact detailed-balance audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KineticError",
    "StepError",
    "TransitionKernel",
    "KineticGrid",
    "kernel_fixed_amount",
    "kernel_uniform_fraction",
    "kernel_proportional",
    "kernel_zero",
    "build_kernel",
    "StepReport",
    "step_master_equation",
    "SolveResult",
    "stationary_solve",
    "DetailedBalanceReport",
    "detailed_balance_residual",
    "SymmetryReport",
    "kernel_symmetry_check",
    "cross_validation_ks",
    "discrete_exponential",
]


class KineticError(RuntimeError):
    pass


class StepError(KineticError):
    pass


@dataclass
class TransitionKernel:
    """Per-payer distribution over transfer sizes, in grid-index units.

    Row k lists the (delta, weight) pairs a payer sitting at grid point k
    may draw; weights of a row sum to 1 (or 0 for an inert payer / the zero
    kernel). delta = 0 entries are allowed and mean "no transfer".
    ``recipe`` remembers how the kernel was built so it can be regenerated
    when the grid range is extended.
    """

    name: str
    deltas: np.ndarray
    weights: np.ndarray
    recipe: tuple | None = None

    def __post_init__(self) -> None:
        self.deltas = np.asarray(self.deltas, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.deltas.shape != self.weights.shape or self.deltas.ndim != 2:
            raise ValueError("deltas and weights must be matching 2-d arrays")
        if np.any(self.weights < 0) or np.any(self.deltas < 0):
            raise ValueError("kernel entries must be non-negative")
        row_sums = self.weights.sum(axis=1)
        if np.any(row_sums > 1.0 + 1e-12):
            raise ValueError("kernel row weights must sum to at most 1")

    @property
    def points(self) -> int:
        return int(self.deltas.shape[0])

    @property
    def max_delta(self) -> int:
        if self.weights.size == 0 or not np.any(self.weights > 0):
            return 0
        return int(self.deltas[self.weights > 0].max())

    def dense_by_delta(self) -> np.ndarray:
        """[points, max_delta+1] array of weight per (payer, delta)."""
        dense = np.zeros((self.points, self.max_delta + 1), dtype=np.float64)
        for col in range(self.deltas.shape[1]):
            np.add.at(
                dense,
                (np.arange(self.points), np.minimum(self.deltas[:, col], self.max_delta)),
                self.weights[:, col],
            )
        return dense


@dataclass
class KineticGrid:
    """Uniform money grid with probability masses and an attached kernel."""

    step: float
    floor: float
    prob: np.ndarray
    kernel: TransitionKernel | None = None
    bounded_above: bool = False
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError("step must be positive")
        self.prob = np.asarray(self.prob, dtype=np.float64)
        if self.prob.ndim != 1 or self.prob.size < 2:
            raise ValueError("prob must be a 1-d array with at least two points")
        if np.any(self.prob < 0):
            raise ValueError("probabilities must be non-negative")
        total = self.prob.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")

    @property
    def points(self) -> int:
        return int(self.prob.size)

    def values(self) -> np.ndarray:
        return self.floor + self.step * np.arange(self.points)

    def mean(self) -> float:
        return float((self.values() * self.prob).sum())

    @classmethod
    def delta_at(
        cls,
        value: float,
        step: float,
        points: int,
        floor: float = 0.0,
        **kwargs,
    ) -> "KineticGrid":
        """All mass at ``value``; off-lattice values are split between the
        two neighboring points so the grid mean matches exactly."""
        pos = (value - floor) / step
        lo = int(math.floor(pos))
        frac = pos - lo
        if not 0 <= lo < points - 1 and not (lo == points - 1 and frac == 0.0):
            raise ValueError("value lies outside the grid")
        prob = np.zeros(points)
        prob[lo] = 1.0 - frac
        if frac > 0.0:
            prob[lo + 1] = frac
        return cls(step=step, floor=floor, prob=prob, **kwargs)


# ---------------------------------------------------------------------------
# kernel builders


def kernel_fixed_amount(grid: KineticGrid, amount: float) -> TransitionKernel:
    """Every payer transfers the same amount (must sit on the step lattice)."""
    d = amount / grid.step
    if abs(d - round(d)) > 1e-9 or round(d) < 1:
        raise ValueError("amount must be a positive multiple of the grid step")
    d = int(round(d))
    if d >= grid.points:
        raise ValueError("amount exceeds the grid range")
    g = grid.points
    return TransitionKernel(
        name="fixed_amount",
        deltas=np.full((g, 1), d, dtype=np.int64),
        weights=np.ones((g, 1), dtype=np.float64),
        recipe=("fixed_amount", amount),
    )


def kernel_uniform_fraction(grid: KineticGrid, scale: float) -> TransitionKernel:
    """Transfer uniform on (0, scale], discretized to equal weight on the
    lattice sizes {1, ..., scale/step}."""
    s = scale / grid.step
    if abs(s - round(s)) > 1e-9 or round(s) < 1:
        raise ValueError("scale must be a positive multiple of the grid step")
    s = int(round(s))
    if s >= grid.points:
        raise ValueError("scale exceeds the grid range")
    g = grid.points
    deltas = np.tile(np.arange(1, s + 1, dtype=np.int64), (g, 1))
    weights = np.full((g, s), 1.0 / s, dtype=np.float64)
    return TransitionKernel(
        name="uniform_fraction",
        deltas=deltas,
        weights=weights,
        recipe=("uniform_fraction", scale),
    )


def kernel_proportional(grid: KineticGrid, fraction: float) -> TransitionKernel:
    """Payer at m transfers fraction*m, as a one-point kernel per grid row
    (the transfer size rounds to the nearest lattice multiple)."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    g = grid.points
    deltas = np.round(fraction * np.arange(g)).astype(np.int64).reshape(g, 1)
    weights = np.ones((g, 1), dtype=np.float64)
    return TransitionKernel(
        name="proportional",
        deltas=deltas,
        weights=weights,
        recipe=("proportional", fraction),
    )


def kernel_zero(grid: KineticGrid) -> TransitionKernel:
    """No dynamics at all (every rate zero)."""
    g = grid.points
    return TransitionKernel(
        name="zero",
        deltas=np.zeros((g, 1), dtype=np.int64),
        weights=np.zeros((g, 1), dtype=np.float64),
        recipe=("zero",),
    )


_BUILDERS = {
    "fixed_amount": kernel_fixed_amount,
    "uniform_fraction": kernel_uniform_fraction,
    "proportional": kernel_proportional,
    "zero": lambda grid: kernel_zero(grid),
}


def build_kernel(grid: KineticGrid, recipe: tuple) -> TransitionKernel:
    kind, *params = recipe
    if kind not in _BUILDERS:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return _BUILDERS[kind](grid, *params)


# ---------------------------------------------------------------------------
# flow computation (shared by stepping, solving, and diagnostics)


def _flow(grid: KineticGrid) -> tuple[np.ndarray, float, float]:
    """Instantaneous (dP/dt, max outflow rate per unit mass, leak rate).

    Event rate for (payer p, receiver r, delta d): P[p] * w[p,d] * P[r],
    admissible when p - d >= 0 and r + d <= top. Each event moves the payer
    down and the receiver up, so four flow terms arise. The receiver-gain
    term is the truncated convolution of P with the payer-admissible flux
    phi[d]; prefix sums handle the admissibility cutoffs.
    """
    kernel = grid.kernel
    if kernel is None:
        raise KineticError("grid has no kernel attached")
    p = grid.prob
    g = p.size
    top = g - 1
    cp = np.cumsum(p)
    dmax = kernel.max_delta
    if dmax == 0:
        return np.zeros(g), 0.0, 0.0

    rows = np.arange(g)
    phi = np.zeros(dmax + 1)
    loss_pay = np.zeros(g)
    gain_pay = np.zeros(g)
    rate_pay = np.zeros(g)
    for col in range(kernel.deltas.shape[1]):
        d = kernel.deltas[:, col]
        w = kernel.weights[:, col]
        live = (w > 0) & (d > 0)
        adm = live & (rows >= d)
        if not np.any(live):
            continue
        np.add.at(phi, d[adm], p[adm] * w[adm])
        recv_room = cp[top - d[adm]]
        flux = p[adm] * w[adm] * recv_room
        loss_pay[adm] += flux
        rate_pay[adm] += w[adm] * recv_room
        np.add.at(gain_pay, rows[adm] - d[adm], flux)

    psi = np.cumsum(phi)
    room = psi[np.minimum(top - rows, dmax).clip(min=0)]
    room[top - rows < 0] = 0.0
    loss_recv = p * room
    gain_recv = np.convolve(p, phi)[:g]
    leak = float((phi * (cp[top] - cp[top - np.arange(dmax + 1)])).sum())

    dp = gain_pay + gain_recv - loss_pay - loss_recv
    max_rate = float(np.max(rate_pay + room)) if g else 0.0
    return dp, max_rate, leak


@dataclass(frozen=True)
class StepReport:
    dt: float
    max_rate: float
    leak_rate: float
    renorm_drift: float


def step_master_equation(grid: KineticGrid, dt: float) -> StepReport:
    """One forward-Euler step; mutates grid.prob in place.

    Raises StepError when the stability guard dt * max_rate < 1 fails.
    Renormalizes only to absorb float round-off (drift must stay <= 1e-12).
    """
    if dt <= 0:
        raise StepError("dt must be positive")
    dp, max_rate, leak = _flow(grid)
    if dt * max_rate >= 1.0:
        raise StepError(
            f"unstable step: dt * max total outflow rate = {dt * max_rate:.3g} >= 1"
        )
    grid.prob = grid.prob + dt * dp
    total = float(grid.prob.sum())
    drift = abs(total - 1.0)
    if drift > 1e-12:
        raise StepError(f"probability drift {drift:.3g} exceeds round-off budget")
    grid.prob /= total
    grid.time += dt
    return StepReport(dt=dt, max_rate=max_rate, leak_rate=leak, renorm_drift=drift)


@dataclass
class SolveResult:
    grid: KineticGrid
    converged: bool
    steps: int
    residual: float
    tolerance: float
    leaked: float
    range_doublings: int
    mean_drift: float


def stationary_solve(
    grid: KineticGrid,
    tolerance: float = 1e-10,
    max_steps: int = 100_000,
    safety: float = 0.45,
    leak_budget: float = 1e-6,
) -> SolveResult:
    """Iterate to the stationary distribution.

    Stops when the residual max|dP/dt| falls below tolerance (per unit
    time). dt adapts to the stability guard, halving further if a step would
    go negative. When accumulated leakage past the (artificial) grid top
    exceeds leak_budget, the range doubles and the kernel is rebuilt from
    its recipe; a bounded_above grid treats top blocking as physics instead.
    """
    initial_mean = grid.mean()
    leaked = 0.0
    doublings = 0
    steps = 0
    residual = math.inf
    while steps < max_steps:
        dp, max_rate, leak = _flow(grid)
        residual = float(np.max(np.abs(dp)))
        if residual < tolerance:
            break
        dt = safety / max_rate
        for _ in range(60):
            candidate = grid.prob + dt * dp
            if not np.any(candidate < 0):
                break
            dt /= 2.0
        else:
            raise KineticError("step size underflow while enforcing positivity")
        total = candidate.sum()
        grid.prob = candidate / total
        grid.time += dt
        leaked += leak * dt
        steps += 1
        if leaked > leak_budget and not grid.bounded_above:
            if grid.kernel is None or grid.kernel.recipe is None:
                raise KineticError(
                    "grid range exhausted and kernel has no recipe to rebuild from"
                )
            if doublings >= 4:
                raise KineticError("grid range doubled too many times")
            extended = KineticGrid(
                step=grid.step,
                floor=grid.floor,
                prob=np.concatenate([grid.prob, np.zeros(grid.points)])
                / grid.prob.sum(),
                bounded_above=grid.bounded_above,
                time=grid.time,
            )
            extended.kernel = build_kernel(extended, grid.kernel.recipe)
            grid = extended
            doublings += 1
            leaked = 0.0
    mean_drift = abs(grid.mean() - initial_mean) / max(abs(initial_mean), 1e-300)
    return SolveResult(
        grid=grid,
        converged=residual < tolerance,
        steps=steps,
        residual=residual,
        tolerance=tolerance,
        leaked=leaked,
        range_doublings=doublings,
        mean_drift=mean_drift,
    )


# ---------------------------------------------------------------------------
# detailed balance and kernel symmetry


@dataclass(frozen=True)
class DetailedBalanceReport:
    residual: float
    entries_checked: int
    excluded_zero_probability: int


def detailed_balance_residual(grid: KineticGrid) -> DetailedBalanceReport:
    """Worst relative imbalance between each transition and its reverse.

    For every admissible (payer m, partner m', transfer delta): forward rate
    f_fwd P(m) P(m') against reverse rate f_rev P(m-delta) P(m'+delta),
    where f_rev is the weight with which a payer at m'+delta draws delta.
    Entries where both sides vanish are excluded and counted.
    """
    kernel = grid.kernel
    if kernel is None:
        raise KineticError("grid has no kernel attached")
    p = grid.prob
    g = p.size
    dense = kernel.dense_by_delta()
    residual = 0.0
    checked = 0
    excluded = 0
    for d in range(1, dense.shape[1]):
        col = dense[:, d]
        if not np.any(col > 0):
            continue
        w_pay = col[d:]
        fwd = np.outer(w_pay * p[d:], p[: g - d])
        rev = np.outer(p[: g - d], w_pay * p[d:])
        denom = np.maximum(fwd, rev)
        live = denom > 0
        excluded += int((~live).sum())
        checked += int(live.sum())
        if np.any(live):
            residual = max(
                residual,
                float(np.max(np.abs(fwd[live] - rev[live]) / denom[live])),
            )
    return DetailedBalanceReport(
        residual=residual,
        entries_checked=checked,
        excluded_zero_probability=excluded,
    )


@dataclass(frozen=True)
class SymmetryReport:
    symmetric: bool
    max_asymmetry: float
    witness: tuple[float, float, float] | None
    witness_rates: tuple[float, float] | None


def kernel_symmetry_check(
    kernel: TransitionKernel, step: float = 1.0, floor: float = 0.0
) -> SymmetryReport:
    """Is the transfer-size distribution independent of the payer's money?

    Time-reversal symmetry of the dynamics requires that for every (m, m',
    delta) the forward weight w(m, delta) equals the reverse weight
    w(m' + delta, delta). That holds exactly when each delta column is
    constant across admissible payers; the first violating pair is returned
    as a witness (m, m', delta) in money units, with the two rates.
    """
    dense = kernel.dense_by_delta()
    g = dense.shape[0]
    worst = 0.0
    witness = None
    witness_rates = None
    for d in range(1, dense.shape[1]):
        col = dense[d:, d]
        if col.size == 0 or not np.any(col > 0):
            continue
        hi = int(np.argmax(col))
        lo = int(np.argmin(col))
        spread = float(col[hi] - col[lo])
        if spread > worst:
            worst = spread
            # payer m = hi+d pays delta d; partner at m' = lo (so that the
            # reverse payer lo+d sits at the minimizing row).
            witness = (
                floor + step * (hi + d),
                floor + step * lo,
                step * d,
            )
            witness_rates = (float(col[hi]), float(col[lo]))
    symmetric = worst <= 1e-12
    return SymmetryReport(
        symmetric=symmetric,
        max_asymmetry=worst,
        witness=None if symmetric else witness,
        witness_rates=None if symmetric else witness_rates,
    )


# ---------------------------------------------------------------------------
# references and cross-validation


def discrete_exponential(grid: KineticGrid, mean_value: float) -> np.ndarray:
    """Geometric masses on the grid with the given mean (in money units)."""
    mu = (mean_value - grid.floor) / grid.step
    if mu <= 0:
        raise ValueError("mean must lie above the grid floor")
    q = mu / (1.0 + mu)
    pmf = (1.0 - q) * q ** np.arange(grid.points)
    return pmf / pmf.sum()


def cross_validation_ks(grid: KineticGrid, hist) -> float:
    """KS distance between solver masses and a Monte Carlo histogram.

    Grid point k stands for the bin centered on it, so both CDFs are
    compared at the histogram's bin edges: the solver CDF at edge e counts
    all grid points below e.
    """
    solver_cdf_points = np.cumsum(grid.prob)
    edges = hist.bin_edges()
    values = grid.values()
    idx = np.searchsorted(values, edges - 1e-12 * grid.step)
    solver_cdf = np.concatenate([[0.0], solver_cdf_points])[idx]
    empirical = np.concatenate([[0.0], np.cumsum(hist.probabilities())])
    return float(np.max(np.abs(solver_cdf - empirical)))
