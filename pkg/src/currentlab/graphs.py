"""Finite weighted coupling graphs: lattice boxes, file-defined graphs, and
block-decorated graphs for composite spin variables.

Vertices are dense integers 0..n-1.  Edges carry non-negative couplings J and
are stored once per unordered pair, in a fixed order, so that all downstream
enumeration and Monte Carlo output is reproducible.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_SITE_CAP = 20_000_000


class GraphError(ValueError):
    """Invalid graph construction or graph file."""


@dataclass(frozen=True)
class CouplingGraph:
    """Immutable weighted graph with optional lattice embedding and a marked
    boundary face (a cyclic vertex list used for boundary-correlation tests).

    ``blocks`` records constituent membership for decorated graphs: entry ``b``
    lists the site ids belonging to block ``b`` of the base graph.
    """

    n_vertices: int
    edges: tuple[tuple[int, int, float], ...]
    embedding: tuple[tuple[int, ...], ...] | None = None
    boundary_face: tuple[int, ...] | None = None
    blocks: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.n_vertices < 1:
            raise GraphError("graph needs at least one vertex")
        seen = set()
        for k, (u, v, j) in enumerate(self.edges):
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise GraphError(f"edge {k} ({u},{v}) references an undeclared vertex")
            if u == v:
                raise GraphError(f"edge {k} is a self-loop at vertex {u}")
            if j < 0:
                raise GraphError(f"edge {k} ({u},{v}) has negative coupling J={j}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge ({u},{v}); merge parallel couplings first")
            seen.add(key)
        if self.embedding is not None and len(self.embedding) != self.n_vertices:
            raise GraphError("embedding must list coordinates for every vertex")
        if self.boundary_face is not None:
            face = self.boundary_face
            if len(face) < 3:
                raise GraphError("boundary face needs at least 3 vertices")
            if len(set(face)) != len(face):
                raise GraphError("boundary face must be a simple cycle of distinct vertices")
            for v in face:
                if not 0 <= v < self.n_vertices:
                    raise GraphError(f"boundary face references undeclared vertex {v}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def couplings(self) -> list[float]:
        return [j for _, _, j in self.edges]

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-vertex list of (neighbor, edge index)."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for k, (u, v, _) in enumerate(self.edges):
            adj[u].append((v, k))
            adj[v].append((u, k))
        return adj

    def coupling_matrix(self):
        """Dense symmetric J matrix (small graphs only)."""
        import numpy as np

        m = np.zeros((self.n_vertices, self.n_vertices))
        for u, v, j in self.edges:
            m[u, v] = j
            m[v, u] = j
        return m


@dataclass(frozen=True)
class LatticeSpec:
    """Hypercubic box in Z^d: side L, uniform coupling J, free or periodic."""

    d: int
    L: int
    J: float = 1.0
    bc: str = "free"
    site_cap: int = field(default=DEFAULT_SITE_CAP, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise GraphError("dimension must be >= 1")
        if self.L < 1:
            raise GraphError("side length must be >= 1")
        if self.J <= 0:
            raise GraphError("uniform coupling must be positive")
        if self.bc not in ("free", "periodic"):
            raise GraphError(f"unknown boundary condition {self.bc!r}")
        if self.bc == "periodic" and self.L < 3:
            raise GraphError("periodic boxes need L >= 3 (L = 2 would create parallel edges)")


def _site_index(coord: tuple[int, ...], L: int) -> int:
    # row-major: the last coordinate varies fastest
    idx = 0
    for c in coord:
        idx = idx * L + c
    return idx


def build_lattice(spec: LatticeSpec) -> CouplingGraph:
    """Nearest-neighbor box in Z^d with row-major vertex numbering.

    Periodic boxes have d*L^d edges, free boxes d*L^(d-1)*(L-1).  For d = 2
    free boxes the outer boundary cycle is recorded as the marked face.
    """
    n = spec.L**spec.d
    if n > spec.site_cap:
        raise GraphError(f"lattice has {n} sites, exceeding the cap of {spec.site_cap}")
    L, d = spec.L, spec.d
    coords = list(itertools.product(range(L), repeat=d))
    edges: list[tuple[int, int, float]] = []
    for coord in coords:
        u = _site_index(coord, L)
        for axis in range(d):
            c = coord[axis]
            if c + 1 < L:
                nb = coord[:axis] + (c + 1,) + coord[axis + 1 :]
                edges.append((u, _site_index(nb, L), spec.J))
            elif spec.bc == "periodic":
                nb = coord[:axis] + (0,) + coord[axis + 1 :]
                v = _site_index(nb, L)
                edges.append((min(u, v), max(u, v), spec.J))
    edges.sort(key=lambda e: (e[0], e[1]))

    face = None
    if d == 2 and spec.bc == "free" and L >= 2:
        face = tuple(_site_index(c, L) for c in _outer_cycle(L))
        if len(face) < 3:
            face = None
    return CouplingGraph(
        n_vertices=n,
        edges=tuple(edges),
        embedding=tuple(coords),
        boundary_face=face,
    )


def _outer_cycle(L: int) -> list[tuple[int, int]]:
    """Outer boundary of an L x L box, counterclockwise from (0, 0)."""
    if L == 1:
        return [(0, 0)]
    top = [(0, y) for y in range(L)]
    right = [(x, L - 1) for x in range(1, L)]
    bottom = [(L - 1, y) for y in range(L - 2, -1, -1)]
    left = [(x, 0) for x in range(L - 2, 0, -1)]
    return top + right + bottom + left


def build_decorated(
    base: CouplingGraph,
    N: int,
    alpha: float,
    g: float,
    site_cap: int = DEFAULT_SITE_CAP,
) -> CouplingGraph:
    """Replace every base vertex by a block of N constituent sites.

    Couplings: g*alpha^2/N inside each block (complete graph) and
    alpha^2*J_xy/N between every constituent pair of adjacent blocks, so the
    weighted block average (alpha/sqrt(N)) * sum of constituents reproduces the
    base interaction.  Block membership is retained on the result.
    """
    if N < 1:
        raise GraphError("block size N must be >= 1")
    if alpha <= 0:
        raise GraphError("alpha must be positive")
    if g < 0:
        raise GraphError("g must be non-negative")
    n_sites = base.n_vertices * N
    if n_sites > site_cap:
        raise GraphError(f"decorated graph has {n_sites} sites, exceeding the cap of {site_cap}")

    def site(x: int, i: int) -> int:
        return x * N + i

    edges: list[tuple[int, int, float]] = []
    j_intra = g * alpha**2 / N
    if j_intra > 0 and N > 1:
        for x in range(base.n_vertices):
            for i in range(N):
                for k in range(i + 1, N):
                    edges.append((site(x, i), site(x, k), j_intra))
    for u, v, j in base.edges:
        j_inter = alpha**2 * j / N
        for i in range(N):
            for k in range(N):
                a, b = site(u, i), site(v, k)
                edges.append((min(a, b), max(a, b), j_inter))
    edges.sort(key=lambda e: (e[0], e[1]))
    blocks = tuple(tuple(site(x, i) for i in range(N)) for x in range(base.n_vertices))
    return CouplingGraph(n_vertices=n_sites, edges=tuple(edges), blocks=blocks)


def load_graph(path: str | Path) -> CouplingGraph:
    """Read a graph file (JSON) and validate it.

    Schema: {"vertices": N, "edges": [[u, v, J], ...],
             "embedding": optional [[x1..xd], ...],
             "boundary_face": optional [v0, v1, ...]}
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise GraphError(f"{path}: top level must be an object")
    try:
        n = int(payload["vertices"])
        raw_edges = payload["edges"]
    except KeyError as exc:
        raise GraphError(f"{path}: missing required key {exc}") from exc
    edges = []
    for k, e in enumerate(raw_edges):
        if len(e) != 3:
            raise GraphError(f"{path}: edge {k} must be [u, v, J]")
        u, v, j = int(e[0]), int(e[1]), float(e[2])
        edges.append((min(u, v), max(u, v), j))
    embedding = payload.get("embedding")
    if embedding is not None:
        embedding = tuple(tuple(int(c) for c in row) for row in embedding)
    face = payload.get("boundary_face")
    if face is not None:
        face = tuple(int(v) for v in face)
    try:
        return CouplingGraph(
            n_vertices=n,
            edges=tuple(sorted(edges)),
            embedding=embedding,
            boundary_face=face,
        )
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from exc


def save_graph(graph: CouplingGraph, path: str | Path) -> None:
    payload: dict = {
        "vertices": graph.n_vertices,
        "edges": [[u, v, j] for u, v, j in graph.edges],
    }
    if graph.embedding is not None:
        payload["embedding"] = [list(c) for c in graph.embedding]
    if graph.boundary_face is not None:
        payload["boundary_face"] = list(graph.boundary_face)
    Path(path).write_text(json.dumps(payload, indent=1))


def single_edge(J: float = 1.0) -> CouplingGraph:
    """Two vertices joined by one coupling; the smallest useful test graph."""
    return CouplingGraph(n_vertices=2, edges=((0, 1, J),))


def cycle_graph(n: int, J: float = 1.0) -> CouplingGraph:
    if n < 3:
        raise GraphError("cycle needs at least 3 vertices")
    edges = [(i, (i + 1) % n, J) for i in range(n)]
    edges = sorted((min(u, v), max(u, v), j) for u, v, j in edges)
    return CouplingGraph(n_vertices=n, edges=tuple(edges),
                         boundary_face=tuple(range(n)))
