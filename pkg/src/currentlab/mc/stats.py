"""Binning and jackknife error analysis for Markov chain time series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    """One Monte Carlo observable with a binned standard error."""

    mean: float
    error: float
    bins: int
    samples: int
    seed: tuple = ()

    def __post_init__(self):
        if self.error < 0:
            raise StatsError("standard error cannot be negative")

    def consistent_with(self, value: float, n_sigma: float = 4.0) -> bool:
        if self.error == 0.0:
            return math.isclose(self.mean, value, rel_tol=1e-12, abs_tol=1e-12)
        return abs(self.mean - value) <= n_sigma * self.error


def bin_means(series, n_bins: int) -> np.ndarray:
    """Equal-size bin averages; trailing samples beyond a full bin are dropped."""
    data = np.asarray(series, dtype=np.float64)
    if n_bins < 2:
        raise StatsError("need at least 2 bins")
    size = data.shape[0] // n_bins
    if size < 1:
        raise StatsError(
            f"insufficient samples ({data.shape[0]}) for {n_bins} bins"
        )
    used = data[: size * n_bins]
    return used.reshape(n_bins, size, *data.shape[1:]).mean(axis=1)

def binned_estimate(series, n_bins: int, seed: tuple = ()) -> Estimate:
    data = np.asarray(series, dtype=np.float64)
    means = bin_means(data, n_bins)
    err = float(np.std(means, ddof=1) / math.sqrt(n_bins))
    return Estimate(mean=float(np.mean(means)), error=err, bins=n_bins,
                    samples=int(data.shape[0]), seed=seed)


def jackknife(stat, *bin_arrays, seed: tuple = (), samples: int = 0) -> Estimate:
    """Leave-one-bin-out jackknife of ``stat(*bin_mean_vectors)``.

    Each array holds one bin mean per bin; ``stat`` maps the per-bin means of
    all inputs to the quantity of interest (ratios, cumulants, fits).
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in bin_arrays]
    n = arrays[0].shape[0]
    if any(a.shape[0] != n for a in arrays):
        raise StatsError("jackknife inputs must share the bin count")
    if n < 2:
        raise StatsError("jackknife needs at least 2 bins")
    full = stat(*[a.mean(axis=0) for a in arrays])
    totals = [a.sum(axis=0) for a in arrays]
    leave_out = np.empty(n)
    for i in range(n):
        leave_out[i] = stat(*[(t - a[i]) / (n - 1) for t, a in zip(totals, arrays)])
    err = math.sqrt((n - 1) / n * float(np.sum((leave_out - leave_out.mean()) ** 2)))
    return Estimate(mean=float(full), error=err, bins=n,
                    samples=samples or n, seed=seed)


def merge_estimates(estimates) -> Estimate:
    """Weighted combination of independent chains (weights by sample count)."""
    ests = list(estimates)
    if not ests:
        raise StatsError("nothing to merge")
    wsum = sum(e.samples for e in ests)
    mean = sum(e.mean * e.samples for e in ests) / wsum
    var = sum((e.error * e.samples) ** 2 for e in ests) / wsum**2
    return Estimate(mean=mean, error=math.sqrt(var),
                    bins=sum(e.bins for e in ests), samples=wsum,
                    seed=ests[0].seed)
