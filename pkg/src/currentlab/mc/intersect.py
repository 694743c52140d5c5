"""Cluster-intersection statistics for two pairs of sourced currents.

Four independent worm chains sample currents with sources {x1,x2}, {x3,x4}
and two sourceless replicas; per joint sample Q is the overlap of the
combined-trace cluster of x1 (replicas 1+3) with that of x3 (replicas 2+4).
The ratio identity P[Q nonempty] = E|Q| / E[|Q| given nonempty] holds by
construction on shared samples and is reported as a residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..graphs import CouplingGraph
from . import rng as rngmod
from .stats import Estimate, StatsError, jackknife
from .wolff import RunConfig
from .worm import worm_run


@dataclass
class IntersectionStats:
    p_nonempty: Estimate
    mean_size: Estimate
    mean_size_given_nonempty: Estimate
    ratio_residual: float
    joint_samples: int


def intersection_stats(config: RunConfig, x1: int, x2: int, x3: int, x4: int
                       ) -> IntersectionStats:
    """Estimate P[Q nonempty], E|Q| and E[|Q| | nonempty] for
    Q = C(x1; n1+n3) intersect C(x3; n2+n4).
    """
    graph = config.graph
    source_sets = [
        frozenset((x1,)) ^ frozenset((x2,)),
        frozenset((x3,)) ^ frozenset((x4,)),
        frozenset(),
        frozenset(),
    ]
    sample_sets = []
    base_cfg = config.with_(estimators=())
    for i, srcs in enumerate(source_sets):
        cfg = base_cfg.with_(stream=config.stream * 4 + i)
        samples, _ = worm_run(cfg, srcs, keep_samples=True)
        sample_sets.append(samples)
    m = min(len(s) for s in sample_sets)
    if m < config.bins:
        raise StatsError("too few joint closed-sector samples for the bin count")

    adj = graph.adjacency()

    def cluster_mask(occ: int, start: int) -> int:
        seen = 1 << start
        stack = [start]
        while stack:
            cur = stack.pop()
            for nb, k in adj[cur]:
                if (occ >> k) & 1 and not (seen >> nb) & 1:
                    seen |= 1 << nb
                    stack.append(nb)
        return seen

    occ = [s.occ_mask[:m] for s in sample_sets]
    sizes = np.empty(m)
    for i in range(m):
        c13 = cluster_mask(int(occ[0][i]) | int(occ[2][i]), x1)
        c24 = cluster_mask(int(occ[1][i]) | int(occ[3][i]), x3)
        sizes[i] = (c13 & c24).bit_count()
    nonempty = (sizes > 0).astype(np.float64)

    seed = rngmod.provenance(config.seed, config.stream)
    n_bins = config.bins
    idx = np.arange(m) * n_bins // m
    counts = np.bincount(idx, minlength=n_bins).astype(np.float64)
    p_bins = np.bincount(idx, weights=nonempty, minlength=n_bins) / counts
    s_bins = np.bincount(idx, weights=sizes, minlength=n_bins) / counts

    def mean_est(vals):
        return Estimate(mean=float(np.mean(vals)),
                        error=float(np.std(vals, ddof=1) / math.sqrt(n_bins)),
                        bins=n_bins, samples=m, seed=seed)

    p_est = mean_est(p_bins)
    size_est = mean_est(s_bins)
    if np.sum(nonempty) == 0:
        raise StatsError("no nonempty intersections observed; cannot condition")
    cond_est = jackknife(lambda s, p: s / p, s_bins, p_bins, seed=seed, samples=m)
    residual = abs(p_est.mean - size_est.mean / cond_est.mean)
    return IntersectionStats(
        p_nonempty=p_est,
        mean_size=size_est,
        mean_size_given_nonempty=cond_est,
        ratio_residual=residual,
        joint_samples=m,
    )
