"""Diagrammatic observables built from two-point tables: bubble sums, tree
bounds, the renormalized-coupling ratio, Wick functionals, and decay
diagnostics for distance-resolved correlations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exact import ExactGibbs
from .graphs import CouplingGraph
from .pfaffian import all_pairings


class DiagramError(ValueError):
    pass


@dataclass
class S2Table:
    """Two-point values, either vertex-indexed ("matrix") or as a
    translation-averaged lattice offset table ("offsets")."""

    kind: str
    values: np.ndarray
    embedding: np.ndarray | None = None

    @classmethod
    def from_matrix(cls, values, embedding=None) -> "S2Table":
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DiagramError("matrix table must be square")
        emb = None if embedding is None else np.asarray(embedding)
        return cls(kind="matrix", values=v, embedding=emb)

    @classmethod
    def from_offsets(cls, table) -> "S2Table":
        return cls(kind="offsets", values=np.asarray(table, dtype=np.float64))

    def pair(self, u: int, v: int) -> float:
        if self.kind != "matrix":
            raise DiagramError("pair lookup needs a vertex-indexed table")
        return float(self.values[u, v])

    def offset_norms(self) -> np.ndarray:
        """Minimum-image Euclidean norm of every lattice offset."""
        if self.kind != "offsets":
            raise DiagramError("offset norms need an offset table")
        shape = self.values.shape
        grids = np.meshgrid(*[np.arange(L) for L in shape], indexing="ij")
        acc = np.zeros(shape)
        for g, L in zip(grids, shape):
            comp = np.minimum(g, L - g)
            acc = acc + comp.astype(np.float64) ** 2
        return np.sqrt(acc)

    def distance_values(self, center: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Flat (norm, value) arrays; matrix tables measure from ``center``."""
        if self.kind == "offsets":
            return self.offset_norms().reshape(-1), self.values.reshape(-1)
        if self.embedding is None:
            raise DiagramError("distance-indexed operations need an embedding")
        diffs = self.embedding - self.embedding[center]
        norms = np.sqrt((diffs.astype(np.float64) ** 2).sum(axis=1))
        return norms, self.values[center]


def bubble(s2: S2Table, center: int, ell: float) -> float:
    """Sum of squared two-point values over the ball of radius ell."""
    if ell < 1:
        raise DiagramError("bubble scale must be at least 1")
    norms, values = s2.distance_values(center)
    return float(np.sum(values[norms < ell] ** 2))


def tree_rhs(s2: S2Table, x1, x2, x3, x4) -> float:
    """2 * sum_u S2(u,x1) S2(u,x2) S2(u,x3) S2(u,x4)."""
    if s2.kind == "matrix":
        v = s2.values
        return 2.0 * float(np.sum(v[:, x1] * v[:, x2] * v[:, x3] * v[:, x4]))
    prod = np.ones_like(s2.values)
    for x in (x1, x2, x3, x4):
        shift = tuple(int(c) for c in x)
        prod = prod * np.roll(s2.values, shift=shift, axis=range(s2.values.ndim))
    return 2.0 * float(np.sum(prod))


def tree_rhs_balanced(
    s2: S2Table, graph: CouplingGraph, beta: float, x1: int, x2: int, x3: int, x4: int
) -> float:
    """Dimensionally balanced tree bound: the hub sum carries coupling-weighted
    flux factors into two of the legs, plus the four source-coincidence
    correction terms.
    """
    if s2.kind != "matrix":
        raise DiagramError("balanced tree bound needs a vertex-indexed table")
    v = s2.values
    bj = beta * graph.coupling_matrix()
    flux = bj @ v  # flux[y, x] = sum_u beta J_{y,u} S2(u, x)
    pts = (x1, x2, x3, x4)
    mask = np.ones(graph.n_vertices, dtype=bool)
    mask[list(pts)] = False
    main = 2.0 * float(
        np.sum(v[mask, x1] * v[mask, x2] * flux[mask, x3] * flux[mask, x4])
    )
    corr = (
        v[x1, x2] * v[x1, x3] * flux[x1, x4]
        + v[x1, x2] * v[x2, x3] * flux[x2, x4]
        + v[x3, x4] * v[x3, x1] * flux[x3, x2]
        + v[x3, x4] * v[x4, x1] * flux[x4, x2]
    )
    return main + 2.0 * float(corr)


def r_ratio(t2: float, t4: float) -> float:
    """-[<T^4> - 3 <T^2>^2] for the unit-variance block variable."""
    if t2 <= 0:
        raise DiagramError("block normalization must be positive")
    return -(t4 - 3.0 * t2 * t2)


def r_ratio_from_block(b2: float, b4: float) -> float:
    """Same ratio from raw block moments (normalization folded in)."""
    if b2 <= 0:
        raise DiagramError("block normalization must be positive")
    return 3.0 - b4 / (b2 * b2)


def wick_functional(s2: S2Table, points) -> float:
    """Pairing sum of two-point values over (2n-1)!! pairings."""
    pts = list(points)
    if len(pts) % 2:
        raise DiagramError("Wick functional needs an even number of points")
    total = 0.0
    for pairs in all_pairings(list(range(len(pts)))):
        prod = 1.0
        for i, j in pairs:
            prod *= s2.pair(pts[i], pts[j])
        total += prod
    return total


def wick_gap_check(
    graph: CouplingGraph, beta: float, points, cap: int = 24
) -> tuple[float, float, bool]:
    """Gap between the Wick functional and the true 2n-point function, with
    the quartic-correction upper bound; returns (gap, bound, holds).
    """
    from .exact import ThermoParams, ursell4_from

    pts = list(points)
    if len(pts) % 2 or len(pts) < 4:
        raise DiagramError("need an even number of points, at least 4")
    gibbs = ExactGibbs(graph, ThermoParams(beta), cap=cap)
    s2 = S2Table.from_matrix(gibbs.s2_table())
    gap = wick_functional(s2, pts) - gibbs.correlation(pts)
    bound = 0.0
    for quad in itertools.combinations(range(len(pts)), 4):
        rest = [pts[i] for i in range(len(pts)) if i not in quad]
        u4 = ursell4_from(gibbs, *(pts[i] for i in quad))
        g_rest = wick_functional(s2, rest) if rest else 1.0
        bound += -1.5 * u4 * g_rest
    tol = 1e-10 * max(1.0, abs(bound))
    holds = -tol <= gap <= bound + tol
    return gap, bound, holds


def empirical_mgf(samples, z_values) -> np.ndarray:
    t = np.asarray(samples, dtype=np.float64)
    zs = np.asarray(z_values, dtype=np.float64)
    with np.errstate(over="ignore"):
        out = np.exp(zs[:, None] * t[None, :]).mean(axis=1)
    if not np.all(np.isfinite(out)):
        raise DiagramError("divergent MGF estimate; shrink the z grid")
    return out


def mgf_gap_check(
    z_values, mgf_values, variance: float, variance_abs: float, r_tilde: float
) -> float:
    """Max signed violation of the quartic moment-generating-function gap
    bound over the z grid (negative means satisfied everywhere).

    |<e^{zT}> - e^{z^2 var/2}| <= 2^-4 z^4 e^{z^2 var_abs/2} r_tilde
    """
    zs = np.asarray(z_values, dtype=np.float64)
    mgf = np.asarray(mgf_values, dtype=np.float64)
    if not np.all(np.isfinite(mgf)):
        raise DiagramError("divergent MGF estimate; shrink the z grid")
    lhs = np.abs(mgf - np.exp(zs**2 * variance / 2.0))
    rhs = 2.0**-4 * zs**4 * np.exp(zs**2 * variance_abs / 2.0) * r_tilde
    return float(np.max(lhs - rhs))


# -- smeared/block fields ---------------------------------------------------

def indicator(x: np.ndarray) -> np.ndarray:
    return (np.abs(x).max(axis=-1) <= 1.0).astype(np.float64)


def tent(x: np.ndarray) -> np.ndarray:
    return np.prod(np.clip(1.0 - np.abs(x), 0.0, None), axis=-1)


def cosine_bump(x: np.ndarray) -> np.ndarray:
    inside = np.abs(x).max(axis=-1) <= 1.0
    return np.where(inside, np.prod(np.cos(np.pi * x / 2.0), axis=-1), 0.0)


TEST_FUNCTIONS = {"indicator": indicator, "tent": tent, "coscos": cosine_bump}


@dataclass
class SmearedField:
    """Test function sampled at lattice sites x/L around the box center."""

    weights: np.ndarray          # per site f(x/L)
    scale: float
    name: str = "indicator"

    @classmethod
    def sample(cls, shape, scale: float, f="indicator") -> "SmearedField":
        fn = TEST_FUNCTIONS[f] if isinstance(f, str) else f
        name = f if isinstance(f, str) else getattr(f, "__name__", "custom")
        coords = np.stack(
            np.meshgrid(*[np.arange(L) for L in shape], indexing="ij"), axis=-1
        ).astype(np.float64)
        center = (np.asarray(shape, dtype=np.float64) - 1.0) / 2.0
        x = (coords - center) / float(scale)
        w = fn(x.reshape(-1, len(shape)))
        return cls(weights=np.asarray(w, dtype=np.float64), scale=float(scale), name=name)


# -- distance-resolved diagnostics -----------------------------------------


@dataclass
class S2Report:
    exponent: float | None
    exponent_error: float | None
    c2: float | None
    dyadic_radii: list[float] = field(default_factory=list)
    dyadic_scaled_means: list[float] = field(default_factory=list)
    dyadic_scaled_errors: list[float] = field(default_factory=list)
    degenerate: bool = False

    @property
    def scaled_nonincreasing(self) -> bool | None:
        """Down-in-scale trend of S2 * |x|^(d-2), slack by one sigma."""
        if self.degenerate or len(self.dyadic_scaled_means) < 2:
            return None
        m = self.dyadic_scaled_means
        e = self.dyadic_scaled_errors
        return all(
            m[i + 1] <= m[i] + (e[i] + e[i + 1]) for i in range(len(m) - 1)
        )


def _dyadic_classes(norms: np.ndarray, r_max: float) -> list[np.ndarray]:
    classes = []
    lo = 1.0
    while lo < r_max:
        hi = 2.0 * lo
        sel = (norms >= lo) & (norms < min(hi, r_max + 1e-12))
        if np.any(sel):
            classes.append(sel)
        lo = hi
    return classes


def s2_diagnostics(
    s2_bins: np.ndarray,
    d: int,
    beta_j: float = 1.0,
    r_max: float | None = None,
) -> S2Report:
    """Decay diagnostics from per-bin offset tables (bins, *shape).

    Reports the least-squares log-log decay exponent over dyadic distance
    classes (jackknife error over bins), the fitted constant of the
    d-2 power envelope, and dyadic averages of S2 * |x|^(d-2).
    """
    bins = np.asarray(s2_bins, dtype=np.float64)
    table = S2Table.from_offsets(bins.mean(axis=0))
    norms = table.offset_norms().reshape(-1)
    if r_max is None:
        r_max = float(norms.max()) / 2.0 + 1e-9
    flat_bins = bins.reshape(bins.shape[0], -1)
    mean_vals = flat_bins.mean(axis=0)
    off_center = norms >= 1.0
    if not np.any(np.abs(mean_vals[off_center]) > 1e-14):
        return S2Report(exponent=None, exponent_error=None, c2=None, degenerate=True)

    classes = _dyadic_classes(norms, r_max)
    if len(classes) < 2:
        raise DiagramError("need at least two dyadic distance classes")
    log_r = np.array([float(np.mean(np.log(norms[sel]))) for sel in classes])

    def slope(vals: np.ndarray) -> float:
        log_v = np.log([float(np.mean(vals[sel])) for sel in classes])
        a = np.vstack([log_r, np.ones_like(log_r)]).T
        coef, *_ = np.linalg.lstsq(a, log_v, rcond=None)
        return -coef[0]

    n_b = bins.shape[0]
    full = slope(mean_vals)
    if n_b >= 2:
        totals = flat_bins.sum(axis=0)
        jk = np.array([slope((totals - flat_bins[i]) / (n_b - 1)) for i in range(n_b)])
        err = math.sqrt((n_b - 1) / n_b * float(np.sum((jk - jk.mean()) ** 2)))
    else:
        err = float("nan")

    probe = off_center & (norms <= r_max)
    c2 = float(np.max(beta_j * mean_vals[probe] * norms[probe] ** (d - 2)))

    scaled = flat_bins * norms[None, :] ** (d - 2)
    radii, means, errs = [], [], []
    for sel in classes:
        per_bin = scaled[:, sel].mean(axis=1)
        radii.append(float(np.exp(np.mean(np.log(norms[sel])))))
        means.append(float(per_bin.mean()))
        errs.append(float(np.std(per_bin, ddof=1) / math.sqrt(n_b)) if n_b >= 2 else 0.0)
    return S2Report(
        exponent=full,
        exponent_error=err,
        c2=c2,
        dyadic_radii=radii,
        dyadic_scaled_means=means,
        dyadic_scaled_errors=errs,
    )
