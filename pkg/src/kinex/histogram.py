"""Fixed-width money histograms.

Snapshots of the balance distribution are stored as fixed-width histograms
whose bin edges always sit on the lattice ``anchor + k * bin_width``. Keeping
every histogram on a common lattice makes time-averaging (pooling) an exact
integer-offset alignment instead of a rebinning approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MoneyHistogram",
    "histogram_from_balances",
    "pool_histograms",
    "histogram_cdf",
    "histogram_ks",
]


@dataclass
class MoneyHistogram:
    """Binned balance distribution at one sweep.

    counts may be fractional for pooled histograms; ``total`` is their sum.
    ``sample_mean`` and ``sample_variance`` are computed from the raw balance
    vector at snapshot time (ddof=1), not from the binned values.
    """

    bin_width: float
    origin: float
    counts: np.ndarray
    total: float
    sample_mean: float
    sample_variance: float
    sweep: int = 0

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if self.total <= 0:
            raise ValueError("histogram total must be positive")

    @property
    def num_bins(self) -> int:
        return int(self.counts.shape[0])

    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def bin_edges(self) -> np.ndarray:
        return self.origin + self.bin_width * np.arange(self.num_bins + 1)

    def bin_centers(self) -> np.ndarray:
        return self.origin + self.bin_width * (np.arange(self.num_bins) + 0.5)


def histogram_from_balances(
    balances: np.ndarray,
    bin_width: float,
    anchor: float = 0.0,
    sweep: int = 0,
) -> MoneyHistogram:
    """Bin a balance vector onto the edge lattice anchored at ``anchor``.

    The origin is the lattice edge at or below the smallest balance, so
    negative balances (debt regimes) get bins of their own rather than being
    clipped.
    """
    balances = np.asarray(balances, dtype=np.float64)
    if balances.size == 0:
        raise ValueError("cannot histogram an empty balance vector")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    lo = float(balances.min())
    origin = anchor + np.floor((lo - anchor) / bin_width) * bin_width
    idx = np.floor((balances - origin) / bin_width).astype(np.int64)
    # A balance sitting exactly on the top edge belongs to the last bin.
    nbins = int(idx.max()) + 1
    idx = np.clip(idx, 0, nbins - 1)
    counts = np.bincount(idx, minlength=nbins).astype(np.float64)
    var = float(balances.var(ddof=1)) if balances.size > 1 else 0.0
    return MoneyHistogram(
        bin_width=float(bin_width),
        origin=float(origin),
        counts=counts,
        total=float(balances.size),
        sample_mean=float(balances.mean()),
        sample_variance=var,
        sweep=sweep,
    )


def _check_aligned(hists: list[MoneyHistogram]) -> float:
    width = hists[0].bin_width
    for h in hists:
        if abs(h.bin_width - width) > 1e-12 * width:
            raise ValueError("histograms have different bin widths")
        offset = (h.origin - hists[0].origin) / width
        if abs(offset - round(offset)) > 1e-9:
            raise ValueError("histogram origins are not on a common edge lattice")
    return width


def pool_histograms(hists: list[MoneyHistogram]) -> MoneyHistogram:
    """Sum histograms on a common lattice (time or ensemble averaging)."""
    if not hists:
        raise ValueError("nothing to pool")
    width = _check_aligned(hists)
    origin = min(h.origin for h in hists)
    top = max(h.origin + h.num_bins * width for h in hists)
    nbins = int(round((top - origin) / width))
    counts = np.zeros(nbins, dtype=np.float64)
    total = 0.0
    mean_acc = 0.0
    m2_acc = 0.0
    for h in hists:
        k0 = int(round((h.origin - origin) / width))
        counts[k0 : k0 + h.num_bins] += h.counts
        total += h.total
        mean_acc += h.sample_mean * h.total
        # pooled variance from per-snapshot moments (population-style combine)
        m2_acc += (h.sample_variance + h.sample_mean**2) * h.total
    mean = mean_acc / total
    var = max(m2_acc / total - mean**2, 0.0)
    return MoneyHistogram(
        bin_width=width,
        origin=origin,
        counts=counts,
        total=total,
        sample_mean=mean,
        sample_variance=var,
        sweep=hists[-1].sweep,
    )


def histogram_cdf(hist: MoneyHistogram) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF evaluated at every bin edge (first edge maps to 0)."""
    edges = hist.bin_edges()
    cdf = np.concatenate([[0.0], np.cumsum(hist.probabilities())])
    return edges, cdf


def histogram_ks(a: MoneyHistogram, b: MoneyHistogram) -> float:
    """Sup distance between two binned empirical CDFs on the shared lattice."""
    width = _check_aligned([a, b])
    origin = min(a.origin, b.origin)
    top = max(a.origin + a.num_bins * width, b.origin + b.num_bins * width)
    nbins = int(round((top - origin) / width))

    def padded(h: MoneyHistogram) -> np.ndarray:
        out = np.zeros(nbins, dtype=np.float64)
        k0 = int(round((h.origin - origin) / width))
        out[k0 : k0 + h.num_bins] = h.counts / h.total
        return out

    ca = np.cumsum(padded(a))
    cb = np.cumsum(padded(b))
    return float(np.max(np.abs(ca - cb)))
