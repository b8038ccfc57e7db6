"""Estimators, entropy accounting, stationarity detection, and exact oracles.

The oracles at the bottom (closed-form composition marginal, brute-force
Markov solve, geometric maximum-entropy reference) are deliberately
independent of the simulation code paths: they recompute expected
distributions from first principles so simulator output can be checked
against something that shares no code with it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.special import gammainc, gammaln
from scipy.stats import kstest

from .histogram import MoneyHistogram, histogram_cdf, histogram_ks, pool_histograms

__all__ = [
    "FitError",
    "FitResult",
    "entropy_per_agent",
    "log_multiplicity",
    "money_temperature",
    "two_sided_means",
    "expectation",
    "fit_exponential",
    "fit_gamma",
    "tail_exponent_hill",
    "power_tail_scan",
    "TailScan",
    "ks_distance",
    "ks_to_exponential",
    "ks_to_gamma",
    "series_from_histograms",
    "StationarityVerdict",
    "detect_stationarity",
    "OracleResult",
    "composition_marginal",
    "exact_stationary_distribution",
    "GeometricReference",
    "geometric_reference",
    "histogram_entropy_ceiling",
]


class FitError(RuntimeError):
    """A fit's preconditions were not met (too little data, bad support)."""


@dataclass(frozen=True)
class FitResult:
    """Outcome of a distribution fit.

    temperature is the scale parameter (exponential/gamma); shape is the
    gamma polynomial exponent (shape - 1 of the standard parameterization);
    tail_exponent is the countercumulative power-law exponent.
    """

    family: str
    support_shift: float
    method: str
    sample_size: int
    temperature: float | None = None
    shape: float | None = None
    tail_exponent: float | None = None
    ks_statistic: float | None = None

    def __post_init__(self) -> None:
        if self.family not in ("exponential", "gamma", "power_law"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.temperature is not None and not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.ks_statistic is not None and not 0 <= self.ks_statistic <= 1:
            raise ValueError("ks_statistic must lie in [0, 1]")
        if self.sample_size <= 0:
            raise ValueError("sample_size must be positive")


# ---------------------------------------------------------------------------
# entropy and moments


def entropy_per_agent(hist: MoneyHistogram | np.ndarray) -> float:
    """Shannon entropy (nats) of the binned balance distribution."""
    counts = hist.counts if isinstance(hist, MoneyHistogram) else np.asarray(hist)
    counts = counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("empty histogram")
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def log_multiplicity(counts: np.ndarray) -> float:
    """ln of the number of agent assignments realizing integer bin counts.

    Computed directly from factorials (via gammaln), independently of the
    entropy formula: ln(N! / prod(n_k!)).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0) or np.any(np.abs(counts - np.round(counts)) > 1e-9):
        raise ValueError("counts must be non-negative integers")
    n = counts.sum()
    return float(gammaln(n + 1.0) - gammaln(counts + 1.0).sum())


def money_temperature(data: MoneyHistogram | np.ndarray) -> float:
    """Effective temperature = mean money per agent."""
    if isinstance(data, MoneyHistogram):
        return data.sample_mean
    return float(np.asarray(data, dtype=np.float64).mean())


def two_sided_means(balances: np.ndarray) -> tuple[float, float]:
    """(mean of positive balances, mean magnitude of negative balances).

    These estimate the two decay scales of a two-sided exponential; either
    value is nan when no agent sits on that side.
    """
    balances = np.asarray(balances, dtype=np.float64)
    pos = balances[balances > 0]
    neg = balances[balances < 0]
    up = float(pos.mean()) if pos.size else math.nan
    down = float(-neg.mean()) if neg.size else math.nan
    return up, down


def expectation(hist: MoneyHistogram, observable) -> float:
    """Mean of observable(bin center) under the binned distribution."""
    values = np.asarray(observable(hist.bin_centers()), dtype=np.float64)
    return float((values * hist.probabilities()).sum())


# ---------------------------------------------------------------------------
# parametric fits


def _nonempty_bins_above(hist: MoneyHistogram, shift: float) -> int:
    edges = hist.bin_edges()[:-1]
    keep = edges >= shift - 1e-9 * hist.bin_width
    return int(np.count_nonzero(hist.counts[keep] > 0))


def fit_exponential(
    data: MoneyHistogram | np.ndarray, support_shift: float = 0.0
) -> FitResult:
    """Maximum-likelihood exponential fit on [support_shift, inf).

    The MLE temperature is the mean excess over the shift. Requires at least
    10 nonempty bins (or 10 samples) above the shift so the KS statistic is
    meaningful.
    """
    if isinstance(data, MoneyHistogram):
        if _nonempty_bins_above(data, support_shift) < 10:
            raise FitError("need at least 10 nonempty bins above the support shift")
        temperature = data.sample_mean - support_shift
        size = int(round(data.total))
        if temperature <= 0:
            raise FitError("mean does not exceed the support shift")
        ks = ks_to_exponential(data, temperature, support_shift)
        method = "mle-binned"
    else:
        samples = np.asarray(data, dtype=np.float64)
        above = samples[samples > support_shift]
        if above.size < 10:
            raise FitError("need at least 10 samples above the support shift")
        if float(samples.max()) == float(samples.min()):
            raise FitError("degenerate sample (zero spread)")
        temperature = float(samples.mean()) - support_shift
        size = int(samples.size)
        if temperature <= 0:
            raise FitError("mean does not exceed the support shift")
        ks = float(
            kstest(
                samples,
                lambda x: 1.0
                - np.exp(-np.maximum(x - support_shift, 0.0) / temperature),
            ).statistic
        )
        method = "mle-samples"
    return FitResult(
        family="exponential",
        support_shift=support_shift,
        method=method,
        sample_size=size,
        temperature=float(temperature),
        ks_statistic=ks,
    )


def fit_gamma(
    data: MoneyHistogram | np.ndarray, support_shift: float = 0.0
) -> FitResult:
    """Method-of-moments gamma fit on [support_shift, inf).

    shape_std = mean^2/var, temperature = var/mean (both on the shifted
    data); the reported ``shape`` is shape_std - 1, the exponent of the
    polynomial prefactor m^shape * exp(-m/T).
    """
    if isinstance(data, MoneyHistogram):
        if data.origin < support_shift - 1e-9 * data.bin_width:
            raise FitError("histogram has mass below the gamma support")
        mean = data.sample_mean - support_shift
        var = data.sample_variance
        size = int(round(data.total))
        if _nonempty_bins_above(data, support_shift) < 10:
            raise FitError("need at least 10 nonempty bins above the support shift")
    else:
        samples = np.asarray(data, dtype=np.float64) - support_shift
        if samples.size < 10:
            raise FitError("need at least 10 samples")
        mean = float(samples.mean())
        var = float(samples.var(ddof=1))
        size = int(samples.size)
    if mean <= 0 or var <= 0:
        raise FitError("moments are not usable for a gamma fit")
    shape_std = mean * mean / var
    temperature = var / mean
    if isinstance(data, MoneyHistogram):
        ks = ks_to_gamma(data, shape_std, temperature, support_shift)
    else:
        ks = float(
            kstest(
                samples,
                lambda x: gammainc(shape_std, np.maximum(x, 0.0) / temperature),
            ).statistic
        )
    return FitResult(
        family="gamma",
        support_shift=support_shift,
        method="mom",
        sample_size=size,
        temperature=float(temperature),
        shape=float(shape_std - 1.0),
        ks_statistic=ks,
    )


def tail_exponent_hill(data: np.ndarray, tail_fraction: float = 0.05) -> FitResult:
    """Hill estimator of the countercumulative tail exponent.

    Uses the top tail_fraction of the sample; requires at least 100 tail
    points, all positive.
    """
    samples = np.sort(np.asarray(data, dtype=np.float64))[::-1]
    k = int(math.floor(tail_fraction * samples.size))
    if k < 100:
        raise FitError("tail has fewer than 100 samples")
    threshold = samples[k]
    if threshold <= 0:
        raise FitError("tail extends to non-positive values")
    alpha = k / float(np.log(samples[:k] / threshold).sum())
    return FitResult(
        family="power_law",
        support_shift=float(threshold),
        method=f"hill@{tail_fraction:g}",
        sample_size=int(samples.size),
        tail_exponent=float(alpha),
    )


@dataclass(frozen=True)
class TailScan:
    """Hill estimates across shrinking tail fractions.

    For a genuine power-law tail the estimates stabilize as the fraction
    shrinks; for exponential-tailed data they grow without bound, so an
    estimate above 5 at the smallest usable fraction is flagged as
    ``no_power_tail``.
    """

    estimates: dict[float, float]
    no_power_tail: bool


def power_tail_scan(
    data: np.ndarray, fractions: tuple[float, ...] = (0.05, 0.02, 0.005)
) -> TailScan:
    estimates: dict[float, float] = {}
    for fraction in sorted(fractions, reverse=True):
        try:
            estimates[fraction] = tail_exponent_hill(data, fraction).tail_exponent
        except FitError:
            continue
    if not estimates:
        raise FitError("no tail fraction left at least 100 samples")
    smallest = min(estimates)
    return TailScan(estimates=estimates, no_power_tail=estimates[smallest] > 5.0)


# ---------------------------------------------------------------------------
# binned Kolmogorov-Smirnov distances


def _binned_ks_against(hist: MoneyHistogram, cdf) -> float:
    edges, empirical = histogram_cdf(hist)
    model = np.asarray(cdf(edges), dtype=np.float64)
    return float(np.max(np.abs(empirical - model)))


def ks_distance(data: MoneyHistogram | np.ndarray, cdf) -> float:
    """Sup-norm distance between the empirical CDF of ``data`` (histogram or
    raw samples) and a reference CDF callable."""
    if isinstance(data, MoneyHistogram):
        return _binned_ks_against(data, cdf)
    samples = np.asarray(data, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("empty sample")
    return float(kstest(samples, lambda x: np.asarray(cdf(x), dtype=np.float64)).statistic)


def ks_to_exponential(
    hist: MoneyHistogram, temperature: float | None = None, support_shift: float = 0.0
) -> float:
    """Sup distance at bin edges between the binned CDF and an exponential.

    temperature=None fits it first (mean excess over the shift).
    """
    if temperature is None:
        temperature = hist.sample_mean - support_shift
    if temperature <= 0:
        raise FitError("temperature must be positive")
    return _binned_ks_against(
        hist,
        lambda x: 1.0 - np.exp(-np.maximum(x - support_shift, 0.0) / temperature),
    )


def ks_to_gamma(
    hist: MoneyHistogram,
    shape_std: float,
    temperature: float,
    support_shift: float = 0.0,
) -> float:
    return _binned_ks_against(
        hist,
        lambda x: gammainc(shape_std, np.maximum(x - support_shift, 0.0) / temperature),
    )


# ---------------------------------------------------------------------------
# time series and stationarity


def series_from_histograms(
    histograms: list[MoneyHistogram], support_shift: float | None = None
) -> dict[str, np.ndarray]:
    """Per-snapshot summary series: sweep, entropy, temperature, variance,
    and KS distance to the best-fit shifted exponential.

    support_shift=None anchors each snapshot's exponential at its own lowest
    bin edge (a diagnostic default that works for every regime).
    """
    sweeps, entropies, temps, variances, ks_vals = [], [], [], [], []
    for hist in histograms:
        shift = hist.origin if support_shift is None else support_shift
        sweeps.append(hist.sweep)
        entropies.append(entropy_per_agent(hist))
        temps.append(hist.sample_mean)
        variances.append(hist.sample_variance)
        try:
            ks_vals.append(ks_to_exponential(hist, None, shift))
        except FitError:
            ks_vals.append(math.nan)
    return {
        "sweep": np.asarray(sweeps, dtype=np.int64),
        "entropy": np.asarray(entropies),
        "temperature": np.asarray(temps),
        "variance": np.asarray(variances),
        "ks_to_exponential": np.asarray(ks_vals),
    }


@dataclass(frozen=True)
class StationarityVerdict:
    stationary: bool
    settled_sweep: int | None
    window_sweeps: int
    epsilon: float
    consecutive: int
    window_starts: np.ndarray
    window_entropy: np.ndarray
    window_temperature: np.ndarray
    window_variance: np.ndarray
    adjacent_ks: np.ndarray


def detect_stationarity(
    histograms: list[MoneyHistogram],
    window_sweeps: int = 10_000,
    epsilon: float = 0.01,
    consecutive: int = 3,
) -> StationarityVerdict:
    """Decide whether the distribution has settled.

    Snapshots are grouped into disjoint windows of window_sweeps and pooled
    into one window-averaged histogram each. The verdict is stationary at
    the first point where ``consecutive`` successive window histograms agree
    pairwise (every KS distance among them below epsilon); settled_sweep is
    the start of the first window of that group. A drifting distribution
    keeps failing the skip-pair comparisons even when adjacent windows look
    alike, which is what makes the pairwise form a drift detector.
    """
    if window_sweeps <= 0:
        raise ValueError("window_sweeps must be positive")
    windows: dict[int, list[MoneyHistogram]] = {}
    for hist in histograms:
        windows.setdefault(hist.sweep // window_sweeps, []).append(hist)
    keys = sorted(windows)
    starts: list[int] = []
    pooled: list[MoneyHistogram] = []
    ent, temp, var = [], [], []
    for key in keys:
        merged = pool_histograms(windows[key])
        starts.append(key * window_sweeps)
        pooled.append(merged)
        ent.append(entropy_per_agent(merged))
        temp.append(merged.sample_mean)
        var.append(merged.sample_variance)

    adjacent = [
        histogram_ks(pooled[idx - 1], pooled[idx]) for idx in range(1, len(pooled))
    ]
    settled: int | None = None
    stationary = False
    for idx in range(consecutive - 1, len(pooled)):
        group = range(idx - consecutive + 1, idx + 1)
        if all(
            histogram_ks(pooled[a], pooled[b]) < epsilon
            for a in group
            for b in group
            if a < b
        ):
            stationary = True
            settled = starts[idx - consecutive + 1]
            break
    return StationarityVerdict(
        stationary=stationary,
        settled_sweep=settled,
        window_sweeps=window_sweeps,
        epsilon=epsilon,
        consecutive=consecutive,
        window_starts=np.asarray(starts, dtype=np.int64),
        window_entropy=np.asarray(ent),
        window_temperature=np.asarray(temp),
        window_variance=np.asarray(var),
        adjacent_ks=np.asarray(adjacent),
    )


# ---------------------------------------------------------------------------
# exact small-system oracles


def composition_marginal(num_agents: int, total_money: int) -> np.ndarray:
    """Exact one-agent marginal when every division of total_money among
    num_agents is equally likely: P(m) = C(M-m+N-2, N-2) / C(M+N-1, N-1).
    """
    n, m_total = int(num_agents), int(total_money)
    if n < 2 or m_total < 0:
        raise ValueError("need at least two agents and non-negative money")
    denom = math.comb(m_total + n - 1, n - 1)
    return np.asarray(
        [math.comb(m_total - m + n - 2, n - 2) / denom for m in range(m_total + 1)],
        dtype=np.float64,
    )


@dataclass(frozen=True)
class OracleResult:
    num_states: int
    marginal_formula: np.ndarray
    marginal_chain: np.ndarray
    stationary_max_deviation: float

    @property
    def marginal_max_difference(self) -> float:
        return float(np.max(np.abs(self.marginal_formula - self.marginal_chain)))


def exact_stationary_distribution(
    num_agents: int, total_money: int, max_states: int = 100_000
) -> OracleResult:
    """Solve the one-unit-transfer chain exactly and compare marginals.

    States are all compositions of total_money into num_agents non-negative
    parts; a step picks an ordered pair uniformly and moves one unit unless
    the payer is broke (the move is then blocked and the state unchanged).
    The stationary vector is found by sparse linear solve, and the one-agent
    marginal is returned alongside the closed-form combinatorial result.
    """
    n, m_total = int(num_agents), int(total_money)
    num_states = math.comb(m_total + n - 1, n - 1)
    if num_states > max_states:
        raise ValueError(
            f"state space has {num_states} states (limit {max_states})"
        )
    states: list[tuple[int, ...]] = []
    index: dict[tuple[int, ...], int] = {}
    for dividers in itertools.combinations(range(m_total + n - 1), n - 1):
        prev = -1
        parts = []
        for d in dividers:
            parts.append(d - prev - 1)
            prev = d
        parts.append(m_total + n - 2 - prev)
        state = tuple(parts)
        index[state] = len(states)
        states.append(state)

    pair_prob = 1.0 / (n * (n - 1))
    rows, cols, vals = [], [], []
    for s_idx, state in enumerate(states):
        stay = 0.0
        for i in range(n):
            if state[i] == 0:
                stay += (n - 1) * pair_prob
                continue
            for j in range(n):
                if i == j:
                    continue
                target = list(state)
                target[i] -= 1
                target[j] += 1
                rows.append(s_idx)
                cols.append(index[tuple(target)])
                vals.append(pair_prob)
        if stay > 0:
            rows.append(s_idx)
            cols.append(s_idx)
            vals.append(stay)
    transition = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(num_states, num_states)
    )

    # Solve pi (P - I) = 0 with sum(pi) = 1 by replacing one column equation.
    system = (transition.T - sparse.identity(num_states, format="csr")).tolil()
    system[num_states - 1, :] = 1.0
    rhs = np.zeros(num_states)
    rhs[num_states - 1] = 1.0
    pi = spsolve(system.tocsr(), rhs)

    uniform_dev = float(np.max(np.abs(pi - 1.0 / num_states)))
    marginal = np.zeros(m_total + 1)
    for s_idx, state in enumerate(states):
        marginal[state[0]] += pi[s_idx]
    return OracleResult(
        num_states=num_states,
        marginal_formula=composition_marginal(n, m_total),
        marginal_chain=marginal,
        stationary_max_deviation=uniform_dev,
    )


# ---------------------------------------------------------------------------
# maximum-entropy reference for integer-step histograms


@dataclass(frozen=True)
class GeometricReference:
    """Geometric distribution on bin indices matched to a histogram's mean.

    Among all distributions on {0, 1, 2, ...} with a given mean, the
    geometric has maximal entropy, so its entropy is a hard ceiling for any
    observed binned entropy at the same mean.
    """

    mean_index: float
    success: float
    entropy: float

    def pmf(self, num_bins: int) -> np.ndarray:
        q = self.success
        return (1.0 - q) * q ** np.arange(num_bins)


def geometric_reference(mean_index: float) -> GeometricReference:
    if mean_index <= 0:
        raise ValueError("mean bin index must be positive")
    q = mean_index / (1.0 + mean_index)
    entropy = -math.log(1.0 - q) - q * math.log(q) / (1.0 - q)
    return GeometricReference(mean_index=mean_index, success=q, entropy=entropy)


def histogram_entropy_ceiling(hist: MoneyHistogram) -> float:
    """Max-entropy bound for a floor-bounded histogram.

    Among distributions on bin indices {0, 1, ...} with the observed mean
    index, the geometric one has the largest entropy, so this is a hard
    upper bound on entropy_per_agent(hist) — exact, not asymptotic. The mean
    index is taken from the counts themselves.
    """
    p = hist.probabilities()
    mean_index = float((np.arange(hist.num_bins) * p).sum())
    if mean_index <= 0:
        return 0.0
    return geometric_reference(mean_index).entropy
