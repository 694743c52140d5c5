"""Random currents with exact source-constrained sums and replica events.

Per edge, the infinite sum over occupation numbers collapses onto three
states -- empty, even-positive, odd -- with weights 1, cosh(bJ)-1, sinh(bJ).
Connectivity and parity events only see that reduction, so sums over currents
become finite sums over edge-subset patterns:

* an "odd pattern" eta (bitmask) picks the odd edges; its admissibility is
  the parity constraint boundary(eta) = sources;
* folding the even-positive choices over the remaining edges yields, for each
  support pattern s, the total weight of currents with trace exactly s.

Multi-replica event probabilities combine per-replica support distributions
by union convolution; events are functions of support patterns only, so raw
occupation numbers never reach event code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exact import CapExceeded
from .graphs import CouplingGraph

EDGE_CAP = 18
# weighted-term budget for multi-replica products (pairs of support patterns)
PRODUCT_CAP = 400_000_000


def vertex_mask(vertices) -> int:
    m = 0
    for v in vertices:
        m ^= 1 << v
    return m


def sources(occupations, graph: CouplingGraph) -> frozenset[int]:
    """Vertices with odd total incident occupation."""
    n = np.asarray(occupations)
    if n.shape != (graph.n_edges,):
        raise ValueError("occupation vector must cover every edge of the graph")
    parity = [0] * graph.n_vertices
    for k, (u, v, _) in enumerate(graph.edges):
        parity[u] ^= int(n[k]) & 1
        parity[v] ^= int(n[k]) & 1
    return frozenset(v for v in range(graph.n_vertices) if parity[v])


def weight(occupations, graph: CouplingGraph, beta: float) -> float:
    """prod_e (beta J_e)^n(e) / n(e)!"""
    n = np.asarray(occupations)
    if n.shape != (graph.n_edges,):
        raise ValueError("occupation vector must cover every edge of the graph")
    total = 1.0
    for k, (_, _, j) in enumerate(graph.edges):
        ne = int(n[k])
        if ne < 0:
            raise ValueError("occupation numbers must be non-negative")
        total *= (beta * j) ** ne / math.factorial(ne)
    return total


def _bit_products(factors: np.ndarray) -> np.ndarray:
    """out[mask] = prod over set bits of factors (doubling construction)."""
    out = np.ones(1)
    for f in factors:
        out = np.concatenate([out, out * f])
    return out


class CurrentEnsemble:
    """Exact reduced-state enumeration for one (graph, beta) pair.

    Everything is indexed by edge bitmasks: bit k of a pattern is edge k of
    ``graph.edges``.
    """

    def __init__(self, graph: CouplingGraph, beta: float, edge_cap: int = EDGE_CAP):
        if beta < 0:
            raise ValueError("beta must be non-negative")
        if graph.n_edges > edge_cap:
            raise CapExceeded(
                f"{graph.n_edges} edges exceeds the reduced-enumeration cap of {edge_cap}"
            )
        self.graph = graph
        self.beta = beta
        self.n_edges = graph.n_edges
        bj = beta * np.asarray(graph.couplings())
        self._cosh = np.cosh(bj)
        self._sinh = np.sinh(bj)
        self._tanh = np.tanh(bj)
        self._cosh_all = float(np.prod(self._cosh))
        pats = np.arange(1 << self.n_edges, dtype=np.uint64)
        bound = np.zeros(pats.size, dtype=np.int64)
        for v in range(graph.n_vertices):
            inc = np.uint64(vertex_mask(
                k for k, (a, b, _) in enumerate(graph.edges) if v in (a, b)
            ))
            par = (np.bitwise_count(pats & inc) & np.uint64(1)).astype(np.int64)
            bound |= par << v
        self._boundary = bound          # vertex bitmask of d(eta) per odd pattern
        self._tanh_prod = _bit_products(self._tanh)
        self._labels: np.ndarray | None = None
        self._support_cache: dict[int, np.ndarray] = {}

    # -- scalar sums ---------------------------------------------------

    def constrained_sum(self, source_set) -> float:
        """Sum of w(n) over currents with the given sources (exact)."""
        a = vertex_mask(source_set)
        sel = self._tanh_prod[self._boundary == a]
        return self._cosh_all * float(np.sum(sel))

    def correlation(self, vertices) -> float:
        """<prod sigma> via the source-insertion ratio."""
        num = self.constrained_sum_mask(vertex_mask(vertices))
        den = self.constrained_sum(())
        return num / den

    def constrained_sum_mask(self, a: int) -> float:
        sel = self._tanh_prod[self._boundary == a]
        return self._cosh_all * float(np.sum(sel))

    # -- support-pattern measures ---------------------------------------

    def support_weights(self, source_set) -> np.ndarray:
        """w[s] = total weight of currents with sources A and trace exactly s."""
        a = vertex_mask(source_set)
        cached = self._support_cache.get(a)
        if cached is not None:
            return cached
        e = self.n_edges
        sinh_prod = _bit_products(self._sinh)
        w = np.where(self._boundary == a, sinh_prod, 0.0)
        if e:
            wr = w.reshape([2] * e)
            for k in range(e):
                ax = e - 1 - k
                hi = [slice(None)] * e
                lo = [slice(None)] * e
                hi[ax], lo[ax] = 1, 0
                wr[tuple(hi)] += (self._cosh[k] - 1.0) * wr[tuple(lo)]
            w = wr.reshape(-1)
        self._support_cache[a] = w
        return w

    def component_labels(self) -> np.ndarray:
        """labels[s, v] = min vertex of v's component in the trace subgraph s."""
        if self._labels is not None:
            return self._labels
        n_v = self.graph.n_vertices
        size = 1 << self.n_edges
        labels = np.empty((size, n_v), dtype=np.int16)
        labels[0] = np.arange(n_v, dtype=np.int16)
        for s in range(1, size):
            low = s & -s
            k = low.bit_length() - 1
            la = labels[s ^ low].copy()
            u, v, _ = self.graph.edges[k]
            ru, rv = la[u], la[v]
            if ru != rv:
                keep, drop = (ru, rv) if ru < rv else (rv, ru)
                la[la == drop] = keep
            labels[s] = la
        self._labels = labels
        return labels

    def edge_marginals(self, source_set) -> dict[str, np.ndarray]:
        """Exact per-edge P[n(e) odd] and P[n(e) >= 1] in the given sector."""
        a = vertex_mask(source_set)
        mask = self._boundary == a
        z = float(np.sum(self._tanh_prod[mask]))
        if z == 0.0:
            raise ValueError("empty sector: no current satisfies the source constraint")
        pats = np.arange(1 << self.n_edges, dtype=np.uint64)
        p_odd = np.empty(self.n_edges)
        p_occ = np.empty(self.n_edges)
        for k in range(self.n_edges):
            has = (pats & np.uint64(1 << k)) != 0
            odd_sum = float(np.sum(self._tanh_prod[mask & has]))
            even_zero = float(np.sum(self._tanh_prod[mask & ~has])) / self._cosh[k]
            p_odd[k] = odd_sum / z
            p_occ[k] = 1.0 - even_zero / z
        return {"p_odd": p_odd, "p_occupied": p_occ}


# -- replica events ------------------------------------------------------


@dataclass(frozen=True)
class ReplicaEvent:
    """Base for events on tuples of currents; ``groups`` partitions the
    replica indices such that the event depends only on each group's combined
    trace.  Subclasses see support patterns, never occupation numbers.
    """

    groups: tuple[tuple[int, ...], ...] = field(default=((0, 1),), kw_only=True)

    def indicator(self, ens: CurrentEnsemble) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class TrueEvent(ReplicaEvent):
    def indicator(self, ens):
        return np.ones(1 << ens.n_edges, dtype=bool)


@dataclass(frozen=True)
class Connected(ReplicaEvent):
    """x and y joined by the combined trace."""

    x: int = 0
    y: int = 0

    def indicator(self, ens):
        la = ens.component_labels()
        return la[:, self.x] == la[:, self.y]


@dataclass(frozen=True)
class NotConnected(ReplicaEvent):
    x: int = 0
    y: int = 0

    def indicator(self, ens):
        la = ens.component_labels()
        return la[:, self.x] != la[:, self.y]


@dataclass(frozen=True)
class AllConnected(ReplicaEvent):
    """Every listed vertex in one combined-trace cluster."""

    points: tuple[int, ...] = ()

    def indicator(self, ens):
        la = ens.component_labels()
        first = self.points[0]
        out = np.ones(la.shape[0], dtype=bool)
        for p in self.points[1:]:
            out &= la[:, p] == la[:, first]
        return out


@dataclass(frozen=True)
class SetsLinked(ReplicaEvent):
    """Some vertex of xs connected to some vertex of ys."""

    xs: tuple[int, ...] = ()
    ys: tuple[int, ...] = ()

    def indicator(self, ens):
        la = ens.component_labels()
        out = np.zeros(la.shape[0], dtype=bool)
        for x in self.xs:
            for y in self.ys:
                out |= la[:, x] == la[:, y]
        return out


@dataclass(frozen=True)
class ClusterHits(ReplicaEvent):
    """The combined-trace cluster of x meets the target vertex set."""

    x: int = 0
    targets: tuple[int, ...] = ()

    def indicator(self, ens):
        la = ens.component_labels()
        out = np.zeros(la.shape[0], dtype=bool)
        for t in self.targets:
            out |= la[:, t] == la[:, self.x]
        return out


@dataclass(frozen=True)
class ClustersIntersect(ReplicaEvent):
    """Two-group event: cluster of x in group 0 meets cluster of y in group 1."""

    x: int = 0
    y: int = 0

    def cluster_masks(self, ens) -> tuple[np.ndarray, np.ndarray]:
        la = ens.component_labels()
        m1 = la == la[:, self.x][:, None]
        m2 = la == la[:, self.y][:, None]
        return m1, m2


def union_convolve(w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Distribution of the union of two independent support patterns.

    Direct accumulation: all inputs are non-negative so there is no
    cancellation, keeping the result exact to rounding.
    """
    size = w1.size
    out = np.zeros(size)
    pats = np.arange(size, dtype=np.int64)
    for s in np.nonzero(w1)[0]:
        out += np.bincount(np.int64(s) | pats, weights=w1[int(s)] * w2, minlength=size)
    return out


def _group_weights(ens: CurrentEnsemble, source_sets, group) -> np.ndarray:
    w = ens.support_weights(source_sets[group[0]])
    for i in group[1:]:
        w = union_convolve(w, ens.support_weights(source_sets[i]))
    return w


def replica_probability(
    graph: CouplingGraph,
    beta: float,
    source_sets,
    event: ReplicaEvent,
    edge_cap: int = EDGE_CAP,
) -> float:
    """Exact probability of an event under independent source-constrained
    currents, one replica per entry of ``source_sets``.
    """
    ens = CurrentEnsemble(graph, beta, edge_cap)
    return replica_probability_in(ens, source_sets, event)


def _clamp_probability(p: float) -> float:
    # rounding may land a hair outside [0, 1]; anything further is a bug
    if -1e-12 <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + 1e-12:
        return 1.0
    return p


def replica_probability_in(ens: CurrentEnsemble, source_sets, event: ReplicaEvent) -> float:
    k = len(source_sets)
    claimed = sorted(i for g in event.groups for i in g)
    if claimed != list(range(k)):
        raise ValueError(f"event groups {event.groups} do not partition {k} replicas")
    totals = [ens.constrained_sum(a) for a in source_sets]
    norm = math.prod(totals)
    if norm <= 0.0:
        raise ValueError("empty sector: no current satisfies the source constraint")

    if len(event.groups) == 1:
        w = _group_weights(ens, source_sets, event.groups[0])
        ind = event.indicator(ens)
        return _clamp_probability(float(np.sum(w[ind])) / norm)

    if len(event.groups) == 2 and isinstance(event, ClustersIntersect):
        w1 = _group_weights(ens, source_sets, event.groups[0])
        w2 = _group_weights(ens, source_sets, event.groups[1])
        if w1.size * w2.size > PRODUCT_CAP:
            raise CapExceeded("two-group event exceeds the product-state budget")
        m1, m2 = event.cluster_masks(ens)
        total = 0.0
        step = max(1, PRODUCT_CAP // (64 * w2.size))
        m2f = m2.astype(np.float64)
        for start in range(0, w1.size, step):
            stop = min(start + step, w1.size)
            inter = (m1[start:stop].astype(np.float64) @ m2f.T) > 0.5
            total += float(w1[start:stop] @ inter @ w2)
        return _clamp_probability(total / norm)

    raise NotImplementedError("events with more than two independent groups")


def cluster(trace_edges, x: int, graph: CouplingGraph) -> frozenset[int]:
    """Connected component of x in the subgraph of occupied edges.

    ``trace_edges`` is an iterable of edge indices (or a bitmask int).
    """
    if isinstance(trace_edges, (int, np.integer)):
        idx = [k for k in range(graph.n_edges) if (int(trace_edges) >> k) & 1]
    else:
        idx = list(trace_edges)
    adj: dict[int, list[int]] = {}
    for k in idx:
        u, v, _ = graph.edges[k]
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    seen = {x}
    stack = [x]
    while stack:
        cur = stack.pop()
        for nb in adj.get(cur, ()):
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return frozenset(seen)


# -- switching lemma -------------------------------------------------------


def _embed_patterns(sub_to_host: list[int], n_sub_edges: int) -> np.ndarray:
    """Map every pattern over the subgraph's edges into host bitmask space."""
    t = np.arange(1 << n_sub_edges, dtype=np.int64)
    out = np.zeros(t.size, dtype=np.int64)
    for i, k in enumerate(sub_to_host):
        out |= ((t >> i) & 1) << k
    return out


def _restrict_patterns(host_pats: np.ndarray, sub_to_host: list[int]) -> np.ndarray:
    out = np.zeros(host_pats.size, dtype=np.int64)
    for i, k in enumerate(sub_to_host):
        out |= ((host_pats >> k) & 1) << i
    return out


def _even_hit_flags(graph: CouplingGraph, edge_subset: list[int], b_set) -> np.ndarray:
    """flag[t] = can a {0,1} flow on the trace t (over edge_subset) have
    boundary exactly B, i.e. every component of t carries evenly many
    B-vertices.
    """
    b = sorted(set(b_set))
    size = 1 << len(edge_subset)
    flags = np.empty(size, dtype=bool)
    sub_edges = [graph.edges[k] for k in edge_subset]
    labels = np.empty((size, graph.n_vertices), dtype=np.int16)
    labels[0] = np.arange(graph.n_vertices, dtype=np.int16)
    for t in range(size):
        if t:
            low = t & -t
            k = low.bit_length() - 1
            la = labels[t ^ low].copy()
            u, v, _ = sub_edges[k]
            ru, rv = la[u], la[v]
            if ru != rv:
                keep, drop = (ru, rv) if ru < rv else (rv, ru)
                la[la == drop] = keep
            labels[t] = la
        # a lone B-vertex with no incident trace edge is its own component,
        # so the evenness test below also rejects unreachable boundaries
        parities: dict[int, int] = {}
        for x in b:
            r = int(labels[t, x])
            parities[r] = parities.get(r, 0) ^ 1
        flags[t] = all(p == 0 for p in parities.values())
    return flags


def switching_check(
    graph1: CouplingGraph,
    graph2: CouplingGraph,
    beta: float,
    a_set,
    b_set,
    functional: ReplicaEvent | None = None,
    edge_cap: int = EDGE_CAP,
) -> tuple[float, float, float]:
    """Evaluate both sides of the source-switching identity exactly.

    lhs sums F(n1+n2) w(n1) w(n2) over sources (A on graph1, B on graph2);
    rhs moves all sources to replica 1 (A xor B, empty) at the cost of the
    indicator that the combined trace supports a flow on graph2 with
    boundary B.  Returns (lhs, rhs, |lhs - rhs|).
    """
    sub_to_host = []
    host_index = {(u, v): k for k, (u, v, _) in enumerate(graph1.edges)}
    host_j = {(u, v): j for u, v, j in graph1.edges}
    for u, v, j in graph2.edges:
        key = (min(u, v), max(u, v))
        if key not in host_index:
            raise ValueError(f"graph2 edge {key} is not an edge of graph1")
        if host_j[key] != j:
            raise ValueError(f"graph2 edge {key} coupling differs from graph1")
        sub_to_host.append(host_index[key])
    if graph2.n_vertices > graph1.n_vertices:
        raise ValueError("graph2 has vertices outside graph1")

    ens1 = CurrentEnsemble(graph1, beta, edge_cap)
    ens2 = CurrentEnsemble(graph2, beta, edge_cap)
    embed = _embed_patterns(sub_to_host, graph2.n_edges)

    def embedded_weights(source_set) -> np.ndarray:
        w = np.zeros(1 << graph1.n_edges)
        w[embed] = ens2.support_weights(source_set)
        return w

    if functional is None:
        functional = TrueEvent(groups=((0, 1),))
    f_vec = functional.indicator(ens1).astype(np.float64)

    lhs_comb = union_convolve(ens1.support_weights(a_set), embedded_weights(b_set))
    lhs = float(np.dot(lhs_comb, f_vec))

    ab = sorted(set(a_set) ^ set(b_set))
    rhs_comb = union_convolve(ens1.support_weights(ab), embedded_weights(()))
    flags_sub = _even_hit_flags(graph1, sub_to_host, b_set)
    restricted = _restrict_patterns(np.arange(1 << graph1.n_edges, dtype=np.int64),
                                    sub_to_host)
    fb_vec = flags_sub[restricted]
    rhs = float(np.dot(rhs_comb, f_vec * fb_vec))
    return lhs, rhs, abs(lhs - rhs)
