"""Pfaffians, chord-crossing signs, and the boundary pairing identity for
planar spin systems.

The multi-point boundary correlation of a planar model equals a signed sum
over pairings of two-point functions; the sign of a pairing is the parity of
the number of chord crossings when the points sit on the marked face.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import ExactGibbs, ThermoParams
from .graphs import CouplingGraph

DIRECT_EXPANSION_MAX = 8  # points; 105 pairings


class PfaffianError(ValueError):
    pass


@dataclass(frozen=True)
class Pairing:
    """Perfect matching of {0..2n-1} as sorted index pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for a, b in self.pairs:
            if a == b:
                raise PfaffianError("pairing has a fixed point")
            for x in (a, b):
                if x in seen:
                    raise PfaffianError(f"index {x} paired twice")
                seen.add(x)
        if seen != set(range(2 * len(self.pairs))):
            raise PfaffianError("pairing must cover 0..2n-1 exactly once")

    @classmethod
    def from_involution(cls, pi) -> "Pairing":
        pairs = tuple(sorted((i, int(pi[i])) for i in range(len(pi)) if i < pi[i]))
        return cls(pairs)


def all_pairings(items: list[int]):
    """Yield every perfect matching of the given index list."""
    if not items:
        yield []
        return
    first = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1 :]
        for sub in all_pairings(rest):
            yield [(first, items[i])] + sub


def crossing_sign(cyclic_positions, pairing) -> int:
    """(-1)^(number of crossing chord pairs) for chords drawn inside the cycle.

    ``cyclic_positions[i]`` is the location of point i along the cycle; the
    sign only depends on the cyclic order, so any rotation of the position
    labels gives the same answer.
    """
    pos = list(cyclic_positions)
    if len(set(pos)) != len(pos):
        raise PfaffianError("cyclic positions must be distinct")
    rank = {p: r for r, p in enumerate(sorted(pos))}
    ranks = [rank[p] for p in pos]
    pairs = pairing.pairs if isinstance(pairing, Pairing) else tuple(pairing)
    chords = [tuple(sorted((ranks[a], ranks[b]))) for a, b in pairs]
    crossings = 0
    for i in range(len(chords)):
        a, b = chords[i]
        for j in range(i + 1, len(chords)):
            c, d = chords[j]
            if (a < c < b) != (a < d < b):
                crossings += 1
    return -1 if crossings % 2 else 1


def skew_from_upper(upper: np.ndarray) -> np.ndarray:
    """Full antisymmetric matrix from (the upper triangle of) a square array."""
    m = np.asarray(upper, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PfaffianError("need a square array")
    up = np.triu(m, k=1)
    return up - up.T


def pfaffian(a: np.ndarray) -> float:
    """Pf(A) for an antisymmetric matrix of even dimension.

    Direct pairing expansion up to dimension 8; skew-symmetric
    tridiagonalization with partial pivoting beyond that.
    """
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PfaffianError("need a square array")
    dim = m.shape[0]
    if dim % 2:
        raise PfaffianError("pfaffian needs even dimension")
    if np.any(np.diag(m) != 0.0) or not np.array_equal(m.T, -m):
        raise PfaffianError("matrix is not antisymmetric")
    if dim == 0:
        return 1.0
    if dim <= DIRECT_EXPANSION_MAX:
        total = 0.0
        positions = list(range(dim))
        for pairs in all_pairings(positions):
            sign = crossing_sign(positions, pairs)
            prod = 1.0
            for i, j in pairs:
                prod *= m[i, j]
            total += sign * prod
        return total
    return _pfaffian_parlett_reid(m.copy())


def _pfaffian_parlett_reid(m: np.ndarray) -> float:
    """Tridiagonalize by congruence (P A P^T = L T L^T) and multiply the odd
    superdiagonal entries of T; partial pivoting keeps the elimination stable.
    """
    dim = m.shape[0]
    pf = 1.0
    for k in range(0, dim - 2, 2):
        pivot = k + 1 + int(np.argmax(np.abs(m[k + 1 :, k])))
        if pivot != k + 1:
            m[[k + 1, pivot]] = m[[pivot, k + 1]]
            m[:, [k + 1, pivot]] = m[:, [pivot, k + 1]]
            pf = -pf
        if m[k + 1, k] == 0.0:
            return 0.0
        pf *= m[k, k + 1]
        tau = m[k + 2 :, k] / m[k + 1, k]
        m[k + 2 :, k + 2 :] += np.outer(tau, m[k + 2 :, k + 1])
        m[k + 2 :, k + 2 :] -= np.outer(m[k + 2 :, k + 1], tau)
    return pf * m[dim - 2, dim - 1]


def pairing_sum(two_point, positions) -> float:
    """Signed pairing sum of two-point values for points at the given cyclic
    positions; two_point(i, j) supplies the pair value for point indices.
    """
    n_pts = len(positions)
    total = 0.0
    for pairs in all_pairings(list(range(n_pts))):
        sign = crossing_sign(positions, pairs)
        prod = 1.0
        for i, j in pairs:
            prod *= two_point(i, j)
        total += sign * prod
    return total


def boundary_pfaffian_residual(
    graph: CouplingGraph,
    beta: float,
    points,
    cap: int = 24,
) -> float:
    """|S_2n(points) - signed pairing sum of S_2| from exact correlations.

    The points must be distinct vertices on the graph's marked boundary face;
    their face positions fix the crossing signs.  On strictly planar
    nearest-neighbor graphs the residual vanishes to rounding; on non-planar
    graphs the residual itself is the diagnostic.
    """
    pts = list(points)
    if len(pts) % 2:
        raise PfaffianError("need an even number of boundary points")
    if len(set(pts)) != len(pts):
        raise PfaffianError("boundary points must be distinct")
    if graph.boundary_face is None:
        raise PfaffianError("graph has no marked boundary face")
    face_pos = {v: i for i, v in enumerate(graph.boundary_face)}
    try:
        positions = [face_pos[v] for v in pts]
    except KeyError as exc:
        raise PfaffianError(f"point {exc} is not on the marked boundary face") from exc

    gibbs = ExactGibbs(graph, ThermoParams(beta), cap=cap)
    s_full = gibbs.correlation(pts)
    pair_cache: dict[tuple[int, int], float] = {}

    def two_point(i: int, j: int) -> float:
        key = (min(pts[i], pts[j]), max(pts[i], pts[j]))
        if key not in pair_cache:
            pair_cache[key] = gibbs.correlation(key)
        return pair_cache[key]

    return abs(s_full - pairing_sum(two_point, positions))
