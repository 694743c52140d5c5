"""Monte Carlo engines: Wolff cluster updates, a worm sampler for
source-constrained currents, and binned/jackknifed estimators."""

from .rng import stream, provenance
from .stats import Estimate, binned_estimate, jackknife, merge_estimates
from .wolff import RunConfig, wolff_run, wolff_lattice_tables, LatticeTables

__all__ = [
    "Estimate",
    "LatticeTables",
    "RunConfig",
    "binned_estimate",
    "jackknife",
    "merge_estimates",
    "provenance",
    "stream",
    "wolff_lattice_tables",
    "wolff_run",
]
