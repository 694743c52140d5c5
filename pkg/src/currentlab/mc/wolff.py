"""Cluster Monte Carlo for ferromagnetic spin systems on arbitrary graphs.

Wolff single-cluster updates with per-edge activation probability
1 - exp(-2 beta J_e); a plain Metropolis sweep is available as a fallback.
One "sweep" is one cluster update (or one full Metropolis pass).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..graphs import CouplingGraph
from . import rng as rngmod
from .stats import Estimate, StatsError, bin_means, binned_estimate, jackknife


@dataclass(frozen=True)
class RunConfig:
    """Budget and estimator selection for one chain.

    ``sweeps`` counts all updates including thermalization; measurements are
    taken every ``measure_every`` updates after the first ``thermalization``.
    """

    graph: CouplingGraph
    beta: float
    sweeps: int
    thermalization: int | None = None
    seed: int = 0
    stream: int = 0
    estimators: tuple[str, ...] = ("m2", "m4", "binder")
    bins: int = 32
    measure_every: int = 1
    algorithm: str = "wolff"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.bins < 8:
            raise ValueError("bin count must be at least 8")
        if self.algorithm not in ("wolff", "metropolis"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.thermalization is not None and self.sweeps <= self.thermalization:
            raise ValueError("sweeps must exceed thermalization")

    @property
    def therm(self) -> int:
        if self.thermalization is not None:
            return self.thermalization
        return min(max(self.sweeps // 10, 1000), self.sweeps - 1)

    @property
    def n_measurements(self) -> int:
        return (self.sweeps - self.therm) // self.measure_every

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def lattice_shape(graph: CouplingGraph) -> tuple[int, ...]:
    """Box shape implied by a row-major integer embedding."""
    if graph.embedding is None:
        raise ValueError("estimator needs a lattice embedding")
    d = len(graph.embedding[0])
    L = max(c for coord in graph.embedding for c in coord) + 1
    if L**d != graph.n_vertices:
        raise ValueError("embedding is not a full box")
    for i, coord in enumerate(graph.embedding):
        idx = 0
        for c in coord:
            idx = idx * L + c
        if idx != i:
            raise ValueError("embedding is not in row-major vertex order")
    return (L,) * d


def centered_block(graph: CouplingGraph, side: int) -> np.ndarray:
    """Vertex ids of the centered side^d sub-block of a lattice box."""
    shape = lattice_shape(graph)
    L = shape[0]
    if not 1 <= side <= L:
        raise ValueError(f"block side {side} outside 1..{L}")
    lo = (L - side) // 2
    sel = np.ones(1, dtype=bool)
    axis = np.zeros(L, dtype=bool)
    axis[lo : lo + side] = True
    mask = axis
    for _ in range(len(shape) - 1):
        mask = np.logical_and.outer(mask, axis)
    return np.nonzero(mask.reshape(-1))[0]


class _Csr:
    def __init__(self, graph: CouplingGraph, beta: float):
        degrees = np.zeros(graph.n_vertices, dtype=np.int64)
        for u, v, _ in graph.edges:
            degrees[u] += 1
            degrees[v] += 1
        self.indptr = np.zeros(graph.n_vertices + 1, dtype=np.int64)
        np.cumsum(degrees, out=self.indptr[1:])
        self.indices = np.zeros(self.indptr[-1], dtype=np.int64)
        self.prob = np.zeros(self.indptr[-1])
        fill = self.indptr[:-1].copy()
        couplings = set()
        for u, v, j in graph.edges:
            if j < 0:
                raise ValueError("Wolff requires ferromagnetic couplings")
            couplings.add(j)
            p = -math.expm1(-2.0 * beta * j)
            for a, b in ((u, v), (v, u)):
                self.indices[fill[a]] = b
                self.prob[fill[a]] = p
                fill[a] += 1
        # constant-degree graphs with one coupling value (lattice boxes) take a
        # table-based expansion with a scalar bond probability
        self.nbr_table: np.ndarray | None = None
        self.p_uniform = 0.0
        if len(couplings) == 1 and degrees.size and degrees.min() == degrees.max():
            deg = int(degrees[0])
            self.nbr_table = self.indices.reshape(graph.n_vertices, deg)
            self.p_uniform = -math.expm1(-2.0 * beta * next(iter(couplings)))


def _wolff_update(spins: np.ndarray, csr: _Csr, rng: np.random.Generator) -> int:
    seed_site = int(rng.integers(0, spins.size))
    s0 = spins[seed_site]
    spins[seed_site] = -s0
    frontier = np.array([seed_site], dtype=np.int64)
    size = 1
    while frontier.size:
        if csr.nbr_table is not None:
            nbrs = csr.nbr_table[frontier].reshape(-1)
            open_mask = spins[nbrs] == s0
            nbrs = nbrs[open_mask]
            if nbrs.size == 0:
                break
            accept = rng.random(nbrs.size) < csr.p_uniform
        else:
            starts = csr.indptr[frontier]
            counts = csr.indptr[frontier + 1] - starts
            total = int(counts.sum())
            if total == 0:
                break
            pos = np.repeat(starts, counts) + (
                np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
            )
            nbrs = csr.indices[pos]
            open_mask = spins[nbrs] == s0
            if not np.any(open_mask):
                break
            nbrs = nbrs[open_mask]
            accept = rng.random(nbrs.size) < csr.prob[pos[open_mask]]
        grabbed = np.unique(nbrs[accept])
        grabbed = grabbed[spins[grabbed] == s0]  # drop sites flipped this level
        if grabbed.size == 0:
            break
        spins[grabbed] = -s0
        size += grabbed.size
        frontier = grabbed
    return size


def _metropolis_sweep(spins: np.ndarray, csr: _Csr, beta_j_rows, rng) -> None:
    n = spins.size
    sites = rng.integers(0, n, size=n)
    us = rng.random(n)
    for site, u in zip(sites.tolist(), us.tolist()):
        lo, hi = csr.indptr[site], csr.indptr[site + 1]
        local = float(np.dot(beta_j_rows[lo:hi], spins[csr.indices[lo:hi]]))
        d_energy = 2.0 * spins[site] * local
        if d_energy <= 0 or u < math.exp(-d_energy):
            spins[site] = -spins[site]


class _Measurer:
    """Parses estimator tokens and turns measurement rows into Estimates."""

    def __init__(self, config: RunConfig):
        self.columns: list[str] = []
        self.vertex_pairs: list[tuple[int, int]] = []
        self.products: list[tuple[int, ...]] = []
        self.blocks: dict[int, np.ndarray] = {}
        self.wants: list[str] = list(config.estimators)
        self.graph = config.graph
        need = set()
        for token in self.wants:
            if token in ("m2", "m4"):
                need.update(("m2", "m4"))
            elif token == "binder":
                need.update(("m2", "m4"))
            elif token.startswith("s2pair:"):
                u, v = (int(t) for t in token.split(":")[1].split(","))
                self.vertex_pairs.append((u, v))
                need.add(token)
            elif token.startswith("prod:"):
                pts = tuple(int(t) for t in token.split(":")[1].split(","))
                self.products.append(pts)
                need.add(token)
            elif token.startswith("block:"):
                side = int(token.split(":")[1])
                self.blocks[side] = centered_block(config.graph, side)
                need.update((f"block2:{side}", f"block4:{side}"))
            else:
                raise ValueError(f"unknown estimator {token!r}")
        self.columns = sorted(need)

    def row(self, spins: np.ndarray) -> list[float]:
        vals: dict[str, float] = {}
        if "m2" in self.columns:
            m = float(spins.sum()) / spins.size
            vals["m2"] = m * m
            vals["m4"] = m**4
        for u, v in self.vertex_pairs:
            vals[f"s2pair:{u},{v}"] = float(spins[u] * spins[v])
        for pts in self.products:
            vals["prod:" + ",".join(str(p) for p in pts)] = float(
                np.prod(spins[list(pts)].astype(np.float64)))
        for side, sel in self.blocks.items():
            b = float(spins[sel].sum())
            vals[f"block2:{side}"] = b * b
            vals[f"block4:{side}"] = b**4
        return [vals[c] for c in self.columns]

    def estimates(self, rows: np.ndarray, config: RunConfig) -> dict[str, Estimate]:
        seed = rngmod.provenance(config.seed, config.stream)
        by_col = {c: rows[:, i] for i, c in enumerate(self.columns)}
        binned = {c: bin_means(v, config.bins) for c, v in by_col.items()}
        out: dict[str, Estimate] = {}
        n = rows.shape[0]
        for token in self.wants:
            if token in ("m2", "m4") or token.startswith(("s2pair:", "prod:", "block")):
                cols = (
                    [f"block2:{token.split(':')[1]}", f"block4:{token.split(':')[1]}"]
                    if token.startswith("block:")
                    else [token]
                )
                for c in cols:
                    out[c] = binned_estimate(by_col[c], config.bins, seed)
            if token == "binder":
                out["binder"] = jackknife(
                    lambda m2, m4: 1.0 - m4 / (3.0 * m2 * m2),
                    binned["m2"], binned["m4"], seed=seed, samples=n,
                )
                if not out["binder"].mean <= 2.0 / 3.0 + 1e-9:
                    raise StatsError("Binder cumulant exceeded 2/3")
            if token.startswith("block:"):
                side = token.split(":")[1]
                out[f"rl:{side}"] = jackknife(
                    lambda b2, b4: 3.0 - b4 / (b2 * b2),
                    binned[f"block2:{side}"], binned[f"block4:{side}"],
                    seed=seed, samples=n,
                )
        return out


def _drive_chain(config: RunConfig, per_measurement) -> None:
    """Run the spin chain, calling per_measurement(spins) on schedule."""
    if config.n_measurements < config.bins:
        raise StatsError(
            f"{config.n_measurements} measurements cannot fill {config.bins} bins; "
            "increase sweeps or lower the bin count"
        )
    rng = rngmod.stream(config.seed, config.stream)
    csr = _Csr(config.graph, config.beta)
    spins = np.where(rng.random(config.graph.n_vertices) < 0.5, 1, -1).astype(np.int8)
    beta_j_rows = None
    if config.algorithm == "metropolis":
        # per-entry beta*J aligned with csr.indices
        beta_j_rows = np.zeros(csr.indices.size)
        fill = csr.indptr[:-1].copy()
        for u, v, j in config.graph.edges:
            for a in (u, v):
                beta_j_rows[fill[a]] = config.beta * j
                fill[a] += 1
    therm = config.therm
    for sweep in range(config.sweeps):
        if config.algorithm == "wolff":
            _wolff_update(spins, csr, rng)
        else:
            _metropolis_sweep(spins, csr, beta_j_rows, rng)
        done = sweep + 1
        if done > therm and (done - therm) % config.measure_every == 0:
            per_measurement(spins)


def wolff_run(config: RunConfig) -> dict[str, Estimate]:
    """Sample the Gibbs state and return the requested estimates."""
    measurer = _Measurer(config)
    rows: list[list[float]] = []
    _drive_chain(config, lambda spins: rows.append(measurer.row(spins)))
    return measurer.estimates(np.asarray(rows), config)


def wolff_bin_means(config: RunConfig) -> dict[str, np.ndarray]:
    """Per-bin means of every raw measurement column, for composite
    (jackknifed) statistics built outside this module."""
    measurer = _Measurer(config)
    rows: list[list[float]] = []
    _drive_chain(config, lambda spins: rows.append(measurer.row(spins)))
    data = np.asarray(rows)
    return {c: bin_means(data[:, i], config.bins)
            for i, c in enumerate(measurer.columns)}


@dataclass
class LatticeTables:
    """Offset-resolved two-point data plus block moments, kept per bin so
    downstream ratio statistics can jackknife.
    """

    shape: tuple[int, ...]
    s2_bins: np.ndarray              # (bins, *shape) translation-averaged sigma_0 sigma_r
    block_bins: dict[int, tuple[np.ndarray, np.ndarray]]  # side -> (b2, b4) bin means
    m_bins: np.ndarray               # (bins, 2) m2, m4 bin means
    beta: float
    seed: tuple

    @property
    def s2(self) -> np.ndarray:
        return self.s2_bins.mean(axis=0)


def wolff_lattice_tables(config: RunConfig, block_sides=()) -> LatticeTables:
    """Chain driver that accumulates the full offset correlation table via FFT
    along with centered-block moments.
    """
    shape = lattice_shape(config.graph)
    n = config.graph.n_vertices
    n_meas = config.n_measurements
    if n_meas < config.bins:
        raise StatsError("insufficient sweeps for requested bin count")
    per_bin = n_meas // config.bins
    usable = per_bin * config.bins
    blocks = {side: centered_block(config.graph, side) for side in block_sides}
    s2_bins = np.zeros((config.bins, *shape))
    block_acc = {side: np.zeros((config.bins, 2)) for side in blocks}
    m_acc = np.zeros((config.bins, 2))
    state = {"i": 0}

    def measure(spins):
        i = state["i"]
        state["i"] = i + 1
        if i >= usable:
            return
        b = i // per_bin
        f = np.fft.fftn(spins.reshape(shape).astype(np.float64))
        s2_bins[b] += np.fft.ifftn(np.abs(f) ** 2).real / n
        m = float(spins.sum()) / n
        m_acc[b, 0] += m * m
        m_acc[b, 1] += m**4
        for side, sel in blocks.items():
            t = float(spins[sel].sum())
            block_acc[side][b, 0] += t * t
            block_acc[side][b, 1] += t**4

    _drive_chain(config, measure)
    s2_bins /= per_bin
    m_acc /= per_bin
    for side in block_acc:
        block_acc[side] /= per_bin
    return LatticeTables(
        shape=shape,
        s2_bins=s2_bins,
        block_bins={s: (a[:, 0], a[:, 1]) for s, a in block_acc.items()},
        m_bins=m_acc,
        beta=config.beta,
        seed=rngmod.provenance(config.seed, config.stream),
    )
