"""Brute-force Gibbs averages on small graphs, the ground-truth oracle.

All 2^n spin configurations are enumerated in fixed order (vertex v is bit v
of the configuration index) in vectorized chunks; chunk totals are combined
with exactly rounded (fsum) accumulation so identity checks can be held to
1e-10 relative tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import CouplingGraph

ENUMERATION_CAP = 24
_CHUNK_BITS = 20


class CapExceeded(ValueError):
    """Graph too large for exact enumeration."""


@dataclass(frozen=True)
class ThermoParams:
    """Inverse temperature and external field.  The random-current machinery
    requires h = 0; a nonzero field is accepted here for plain Gibbs averages.
    """

    beta: float
    h: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be finite and non-negative, got {self.beta}")
        if not math.isfinite(self.h):
            raise ValueError("h must be finite")


def _check_cap(graph: CouplingGraph, cap: int) -> None:
    if graph.n_vertices > cap:
        raise CapExceeded(
            f"{graph.n_vertices} vertices exceeds the enumeration cap of {cap}"
        )


def reduce_multiset(vertices) -> tuple[int, ...]:
    """Vertices appearing an even number of times drop out (sigma^2 = 1)."""
    counts: dict[int, int] = {}
    for v in vertices:
        counts[v] = counts.get(v, 0) + 1
    return tuple(sorted(v for v, c in counts.items() if c % 2))


class ExactGibbs:
    """Exact Gibbs state of one (graph, beta, h) triple.

    Caches the per-configuration Boltzmann weights when the graph is small
    enough for that to be cheap; otherwise streams chunks on every query.
    """

    def __init__(self, graph: CouplingGraph, params: ThermoParams, cap: int = ENUMERATION_CAP):
        _check_cap(graph, cap)
        self.graph = graph
        self.params = params
        self._cache = graph.n_vertices <= _CHUNK_BITS
        self._spins: np.ndarray | None = None
        self._weights: np.ndarray | None = None
        if self._cache:
            self._spins, self._weights = self._chunk(0, 1 << graph.n_vertices)

    def _chunk(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(start, stop, dtype=np.int64)
        n = self.graph.n_vertices
        spins = np.empty((idx.size, n), dtype=np.int8)
        for v in range(n):
            spins[:, v] = (((idx >> v) & 1) << 1).astype(np.int8) - 1
        energy = np.zeros(idx.size)
        for u, v, j in self.graph.edges:
            energy += j * (spins[:, u] * spins[:, v]).astype(np.float64)
        if self.params.h != 0.0:
            energy += self.params.h * spins.sum(axis=1, dtype=np.float64)
        return spins, np.exp(self.params.beta * energy)

    def _chunks(self):
        if self._cache:
            yield self._spins, self._weights
            return
        total = 1 << self.graph.n_vertices
        step = 1 << _CHUNK_BITS
        for start in range(0, total, step):
            yield self._chunk(start, min(start + step, total))

    def partition_function(self) -> float:
        return math.fsum(float(np.sum(w)) for _, w in self._chunks())

    def expectation(self, values_of_chunk) -> float:
        """<F> for F given as a callable spins-chunk -> per-config values."""
        num = []
        den = []
        for spins, w in self._chunks():
            num.append(float(np.sum(values_of_chunk(spins) * w)))
            den.append(float(np.sum(w)))
        return math.fsum(num) / math.fsum(den)

    def correlation(self, vertices) -> float:
        """<prod sigma_v> over a multiset of vertices."""
        support = reduce_multiset(vertices)
        if not support:
            return 1.0
        if len(support) % 2 == 1 and self.params.h == 0.0:
            return 0.0
        return self.expectation(
            lambda s: np.prod(s[:, support].astype(np.float64), axis=1)
        )

    def s2_table(self) -> np.ndarray:
        """All pair correlations at once; diagonal is 1."""
        num = None
        den = []
        for spins, w in self._chunks():
            sf = spins.astype(np.float64)
            block = sf.T @ (sf * w[:, None])
            num = block if num is None else num + block
            den.append(float(np.sum(w)))
        return num / math.fsum(den)

    def weighted_moments(self, site_weights, orders) -> dict[int, float]:
        """Moments <(sum_v f_v sigma_v)^k> for the requested orders."""
        f = np.asarray(site_weights, dtype=np.float64)
        sums: dict[int, list[float]] = {k: [] for k in orders}
        den = []
        for spins, w in self._chunks():
            t = spins.astype(np.float64) @ f
            den.append(float(np.sum(w)))
            for k in orders:
                sums[k].append(float(np.sum(t**k * w)))
        z = math.fsum(den)
        return {k: math.fsum(v) / z for k, v in sums.items()}

    def mgf(self, site_weights, z_values) -> np.ndarray:
        """<exp(z * sum_v f_v sigma_v)> on a grid of real z."""
        f = np.asarray(site_weights, dtype=np.float64)
        zs = np.asarray(z_values, dtype=np.float64)
        num = np.zeros(zs.size)
        den = []
        for spins, w in self._chunks():
            t = spins.astype(np.float64) @ f
            den.append(float(np.sum(w)))
            num += np.einsum("c,zc->z", w, np.exp(zs[:, None] * t[None, :]))
        return num / math.fsum(den)


def partition_function(graph: CouplingGraph, params: ThermoParams,
                       cap: int = ENUMERATION_CAP) -> float:
    return ExactGibbs(graph, params, cap).partition_function()


def correlation(graph: CouplingGraph, params: ThermoParams, vertices,
                cap: int = ENUMERATION_CAP) -> float:
    return ExactGibbs(graph, params, cap).correlation(vertices)


def ursell4(graph: CouplingGraph, params: ThermoParams, x1: int, x2: int,
            x3: int, x4: int, cap: int = ENUMERATION_CAP) -> float:
    """Fourth truncated correlation; non-positive on ferromagnetic graphs."""
    gibbs = ExactGibbs(graph, params, cap)
    return ursell4_from(gibbs, x1, x2, x3, x4)


def ursell4_from(gibbs: ExactGibbs, x1: int, x2: int, x3: int, x4: int) -> float:
    s4 = gibbs.correlation((x1, x2, x3, x4))
    return (
        s4
        - gibbs.correlation((x1, x2)) * gibbs.correlation((x3, x4))
        - gibbs.correlation((x1, x3)) * gibbs.correlation((x2, x4))
        - gibbs.correlation((x1, x4)) * gibbs.correlation((x2, x3))
    )
