"""Fixed-seed corpus of small random ferromagnetic graphs.

Every instance is generated from a Philox stream keyed by (corpus seed,
instance index), so any failure can be replayed from its index alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graphs import CouplingGraph
from ..mc.rng import stream

DEFAULT_CORPUS_SEED = 20210200


@dataclass(frozen=True)
class CorpusInstance:
    index: int
    graph: CouplingGraph
    beta: float


def random_connected_graph(rng: np.random.Generator, n_min: int = 2, n_max: int = 6,
                           max_edges: int = 8, j_low: float = 0.0,
                           j_high: float = 2.0) -> CouplingGraph:
    """Uniform spanning-tree skeleton plus random extra edges, J ~ U(j_low, j_high)."""
    nv = int(rng.integers(n_min, n_max + 1))
    edges: set[tuple[int, int]] = set()
    order = rng.permutation(nv)
    for i in range(1, nv):
        u = int(order[i])
        v = int(order[int(rng.integers(0, i))])
        edges.add((min(u, v), max(u, v)))
    candidates = [(a, b) for a in range(nv) for b in range(a + 1, nv)]
    rng.shuffle(candidates)
    budget = min(max_edges, len(candidates))
    for pair in candidates:
        if len(edges) >= budget:
            break
        edges.add(pair)
    weighted = tuple(
        sorted((u, v, float(rng.uniform(j_low, j_high))) for u, v in edges)
    )
    return CouplingGraph(n_vertices=nv, edges=weighted)


def corpus(count: int, seed: int = DEFAULT_CORPUS_SEED,
           beta_low: float = 0.0, beta_high: float = 2.0) -> list[CorpusInstance]:
    out = []
    for i in range(count):
        rng = stream(seed, i)
        graph = random_connected_graph(rng)
        beta = float(rng.uniform(beta_low, beta_high))
        out.append(CorpusInstance(index=i, graph=graph, beta=beta))
    return out
