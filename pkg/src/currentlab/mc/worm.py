"""Worm sampler for source-constrained random currents.

The chain lives on an extended space: closed states are currents with the
configured sources A; open states carry a defect pair (head, tail) and have
sources A xor {head} xor {tail}.  Moves are open / shift / close with
Metropolis acceptance in the current weight w(n); closed-sector visits sample
w(n) restricted to the sector, and the open/closed visit ratio estimates
two-point functions.  Open states carry relative weight c_w = p_open /
(p_close |V|) per state, which makes open and close moves rejection-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..graphs import CouplingGraph
from . import rng as rngmod
from .stats import Estimate, StatsError, jackknife
from .wolff import RunConfig

P_OPEN = 0.5
P_CLOSE = 0.5
SAMPLE_MASK_LIMIT = 63  # bitmask sample storage supports up to this many edges


@dataclass(frozen=True)
class WormState:
    """Occupations plus defect endpoints; head is None when closed."""

    n: tuple[int, ...]
    head: int | None = None
    tail: int | None = None

    @property
    def closed(self) -> bool:
        return self.head is None


def initial_current(graph: CouplingGraph, source_set) -> list[int]:
    """A current with the requested sources: xor of tree paths pairing them."""
    srcs = sorted(source_set)
    if len(srcs) % 2:
        raise ValueError("source sets must have even cardinality")
    n = [0] * graph.n_edges
    if not srcs:
        return n
    adj = graph.adjacency()
    parent: dict[int, tuple[int, int] | None] = {}

    def path_edges(a: int, b: int) -> list[int]:
        parent.clear()
        parent[a] = None
        queue = [a]
        while queue:
            cur = queue.pop(0)
            if cur == b:
                break
            for nb, k in adj[cur]:
                if nb not in parent:
                    parent[nb] = (cur, k)
                    queue.append(nb)
        if b not in parent:
            raise ValueError(
                f"sources {a} and {b} lie in different components; sector is empty"
            )
        out = []
        cur = b
        while parent[cur] is not None:
            prev, k = parent[cur]
            out.append(k)
            cur = prev
        return out

    # pair sources within components greedily
    remaining = list(srcs)
    while remaining:
        a = remaining.pop(0)
        comp = _component(graph, adj, a)
        mates = [x for x in remaining if x in comp]
        if not mates:
            raise ValueError(
                f"source {a} cannot be paired inside its component; sector is empty"
            )
        b = mates[0]
        remaining.remove(b)
        for k in path_edges(a, b):
            n[k] ^= 1
    return n


def _component(graph, adj, start) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for nb, _ in adj[cur]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen


class WormChain:
    """One worm Markov chain; exposes stepping plus the exact proposal
    densities needed for detailed-balance unit checks.
    """

    def __init__(self, graph: CouplingGraph, beta: float, source_set,
                 seed: int = 0, stream: int = 0):
        self.graph = graph
        self.beta = beta
        self.sources = frozenset(source_set)
        if len(self.sources) % 2:
            raise ValueError("source sets must have even cardinality")
        self.n = initial_current(graph, self.sources)
        self.head: int | None = None
        self.tail: int | None = None
        self.rng = rngmod.stream(seed, stream)
        self.bj = [beta * j for _, _, j in graph.edges]
        adj = graph.adjacency()
        self.inc = [[(k, nb) for nb, k in adj[v]] for v in range(graph.n_vertices)]
        self.deg = [len(x) for x in self.inc]
        if min(self.deg) == 0 and self.sources:
            pass  # isolated vertices are legal; sources were validated above
        self.c_w = P_OPEN / (P_CLOSE * graph.n_vertices)
        self.odd_mask = 0
        self.occ_mask = 0
        for k, ne in enumerate(self.n):
            if ne % 2:
                self.odd_mask |= 1 << k
            if ne >= 1:
                self.occ_mask |= 1 << k
        self._block: np.ndarray | None = None
        self._block_pos = 0

    def state(self) -> WormState:
        return WormState(tuple(self.n), self.head, self.tail)

    # -- uniform variates in blocks (keeps the Python loop cheap) -------

    def _uniforms(self) -> tuple[float, float, float, float]:
        if self._block is None or self._block_pos >= self._block.shape[0]:
            self._block = self.rng.random((16384, 4))
            self._block_pos = 0
        row = self._block[self._block_pos]
        self._block_pos += 1
        return float(row[0]), float(row[1]), float(row[2]), float(row[3])

    def step(self) -> None:
        u_move, u_pick, u_dir, u_acc = self._uniforms()
        if self.head is None:
            if u_move < P_OPEN:
                v = int(u_pick * self.graph.n_vertices)
                self.head = v
                self.tail = v
            return
        h, t = self.head, self.tail
        if h == t and u_move < P_CLOSE:
            self.head = None
            self.tail = None
            return
        k, other = self.inc[h][int(u_pick * self.deg[h])]
        ne = self.n[k]
        if u_dir < 0.5:
            n_new = ne + 1
            w_ratio = self.bj[k] / n_new
        else:
            if ne == 0:
                return
            n_new = ne - 1
            w_ratio = ne / self.bj[k]
        fwd = (1.0 - P_CLOSE * (h == t)) / self.deg[h]
        rev = (1.0 - P_CLOSE * (other == t)) / self.deg[other]
        if u_acc < w_ratio * rev / fwd:
            self.n[k] = n_new
            self.head = other
            self.odd_mask ^= 1 << k
            if n_new == 0:
                self.occ_mask &= ~(1 << k)
            else:
                self.occ_mask |= 1 << k

    # -- exact transition structure for unit checks ---------------------

    def stationary_weight(self, s: WormState) -> float:
        """Unnormalized target: w(n) on the closed sector, c_w w(n) when open;
        zero off the legal source sectors.
        """
        expect = set(self.sources)
        if not s.closed:
            expect ^= {s.head}
            expect ^= {s.tail}
        parity = [0] * self.graph.n_vertices
        w = 1.0
        for k, (u, v, _) in enumerate(self.graph.edges):
            ne = s.n[k]
            parity[u] ^= ne & 1
            parity[v] ^= ne & 1
            w *= self.bj[k] ** ne / math.factorial(ne)
        if {v for v in range(self.graph.n_vertices) if parity[v]} != expect:
            return 0.0
        return w if s.closed else self.c_w * w

    def transition_density(self, a: WormState, b: WormState) -> float:
        """Probability that one step moves a -> b (a != b)."""
        if a.closed and not b.closed:
            if a.n == b.n and b.head == b.tail:
                return P_OPEN / self.graph.n_vertices
            return 0.0
        if a.closed:
            return 0.0
        if b.closed:
            if a.n == b.n and a.head == a.tail:
                return P_CLOSE
            return 0.0
        if a.tail != b.tail:
            return 0.0
        diffs = [k for k in range(len(a.n)) if a.n[k] != b.n[k]]
        if len(diffs) != 1:
            return 0.0
        k = diffs[0]
        u, v, _ = self.graph.edges[k]
        if {a.head, b.head} != {u, v}:
            return 0.0
        delta = b.n[k] - a.n[k]
        if abs(delta) != 1 or b.n[k] < 0:
            return 0.0
        w_ratio = self.bj[k] / b.n[k] if delta == 1 else a.n[k] / self.bj[k]
        fwd = (1.0 - P_CLOSE * (a.head == a.tail)) / self.deg[a.head]
        rev = (1.0 - P_CLOSE * (b.head == b.tail)) / self.deg[b.head]
        accept = min(1.0, w_ratio * rev / fwd)
        return fwd * 0.5 * accept


@dataclass
class WormSamples:
    """Closed-sector snapshots: per sample the odd-edge and trace bitmasks."""

    step_index: np.ndarray
    odd_mask: np.ndarray
    occ_mask: np.ndarray
    n_edges: int

    def __len__(self) -> int:
        return len(self.step_index)

    def edge_bits(self, which: str = "occ") -> np.ndarray:
        masks = self.occ_mask if which == "occ" else self.odd_mask
        shifts = np.arange(self.n_edges, dtype=np.uint64)
        return ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.float64)


def worm_run(config: RunConfig, source_set, keep_samples: bool = True
             ) -> tuple[WormSamples | None, dict[str, Estimate]]:
    """Run a worm chain; returns closed-sector samples and estimates.

    Estimator tokens: "edges" (per-edge P[n odd], P[n >= 1]), "support"
    (mean trace size), "s2pair:u,v" (open/closed visit ratio).
    """
    graph = config.graph
    if keep_samples and graph.n_edges > SAMPLE_MASK_LIMIT:
        raise ValueError("sample storage supports at most 63 edges")
    chain = WormChain(graph, config.beta, source_set,
                      seed=config.seed, stream=config.stream)
    pairs: list[tuple[int, int]] = []
    want_edges = want_support = False
    for token in config.estimators:
        if token == "edges":
            want_edges = True
        elif token == "support":
            want_support = True
        elif token.startswith("s2pair:"):
            u, v = (int(x) for x in token.split(":")[1].split(","))
            pairs.append((u, v))
        elif token in ("m2", "m4", "binder"):
            raise ValueError(f"estimator {token!r} is a spin observable, not a worm one")
        else:
            raise ValueError(f"unknown estimator {token!r}")

    total = config.sweeps - config.therm
    n_bins = config.bins
    if total < n_bins:
        raise StatsError("insufficient sweeps for requested bin count")
    closed_per_bin = np.zeros(n_bins)
    pair_per_bin = {p: np.zeros(n_bins) for p in pairs}
    step_rec: list[int] = []
    odd_rec: list[int] = []
    occ_rec: list[int] = []
    closed_seen = 0

    for sweep in range(config.sweeps):
        chain.step()
        i = sweep - config.therm
        if i < 0:
            continue
        b = i * n_bins // total
        if chain.head is None:
            closed_per_bin[b] += 1.0
            closed_seen += 1
            if keep_samples and closed_seen % config.measure_every == 0:
                step_rec.append(i)
                odd_rec.append(chain.odd_mask)
                occ_rec.append(chain.occ_mask)
        else:
            key = (chain.head, chain.tail) if chain.head <= chain.tail else (chain.tail, chain.head)
            if key in pair_per_bin:
                pair_per_bin[key][b] += 1.0

    seed = rngmod.provenance(config.seed, config.stream)
    samples = None
    if keep_samples:
        samples = WormSamples(
            step_index=np.asarray(step_rec, dtype=np.int64),
            odd_mask=np.asarray(odd_rec, dtype=np.uint64),
            occ_mask=np.asarray(occ_rec, dtype=np.uint64),
            n_edges=graph.n_edges,
        )

    out: dict[str, Estimate] = {}
    if (want_edges or want_support) and (samples is None or len(samples) < n_bins):
        raise StatsError("too few closed-sector samples for the requested bin count")
    if want_edges or want_support:
        sample_bins = samples.step_index * n_bins // total
        occ = samples.edge_bits("occ")
        odd = samples.edge_bits("odd")
        counts = np.bincount(sample_bins, minlength=n_bins).astype(np.float64)
        if np.any(counts == 0):
            raise StatsError("a bin holds no closed-sector samples; lower the bin count")
        if want_edges:
            for k in range(graph.n_edges):
                occ_b = np.bincount(sample_bins, weights=occ[:, k], minlength=n_bins) / counts
                odd_b = np.bincount(sample_bins, weights=odd[:, k], minlength=n_bins) / counts
                out[f"p_occ:{k}"] = _mean_est(occ_b, len(samples), seed)
                out[f"p_odd:{k}"] = _mean_est(odd_b, len(samples), seed)
        if want_support:
            sup = occ.sum(axis=1)
            sup_b = np.bincount(sample_bins, weights=sup, minlength=n_bins) / counts
            out["support_size"] = _mean_est(sup_b, len(samples), seed)
    for (u, v) in pairs:
        if math.fsum(closed_per_bin) == 0:
            raise StatsError("chain never closed; cannot form visit ratios")
        scale = 1.0 if u == v else 2.0
        out[f"s2:{u},{v}"] = jackknife(
            lambda pv, cv: pv / (scale * chain.c_w * cv),
            pair_per_bin[(min(u, v), max(u, v))], closed_per_bin,
            seed=seed, samples=total,
        )
    return samples, out


def _mean_est(bin_vals: np.ndarray, samples: int, seed) -> Estimate:
    n = bin_vals.size
    err = float(np.std(bin_vals, ddof=1) / math.sqrt(n))
    return Estimate(mean=float(np.mean(bin_vals)), error=err, bins=n,
                    samples=samples, seed=seed)
