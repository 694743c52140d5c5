"""Single-block distributions of weighted spin averages and their tuning
toward a quartic target measure.

A block of N coupled binary spins with a mean-field weight
exp((g/N)(sum sigma)^2) carries the block variable
phi = (alpha/sqrt(N)) * sum sigma.  Matching its second and fourth moments to
a target density ~ exp(-lambda phi^4 + b phi^2) fixes (alpha, g); increasing
N then drives the higher moments toward the target's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

BLOCK_SIZE_CAP = 10_000_000


class TuningError(RuntimeError):
    """The requested moment match has no solution in budget."""


@dataclass(frozen=True)
class BlockParams:
    N: int
    alpha: float
    g: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.g < 0:
            raise ValueError("g must be non-negative")


@dataclass(frozen=True)
class TargetMeasure:
    """Density proportional to exp(-lambda phi^4 + b phi^2)."""

    lam: float
    b: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.lam == 0 and self.b >= 0:
            raise ValueError("lambda = 0 requires b < 0 for normalizability")

    def log_density(self, phi: np.ndarray) -> np.ndarray:
        return -self.lam * phi**4 + self.b * phi**2


def block_pmf(params: BlockParams) -> list[tuple[float, float]]:
    """Support points and probabilities of the block variable.

    Level k (k up spins) sits at phi = (alpha/sqrt(N))(2k - N) with weight
    binom(N, k) * exp((g/N)(2k - N)^2), accumulated in log space.
    """
    n, alpha, g = params.N, params.alpha, params.g
    if n > BLOCK_SIZE_CAP:
        raise ValueError(f"N = {n} exceeds the block-size cap {BLOCK_SIZE_CAP}")
    k = np.arange(n + 1, dtype=np.float64)
    s = 2.0 * k - n
    logw = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + (g / n) * s**2
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    phi = (alpha / math.sqrt(n)) * s
    return list(zip(phi.tolist(), w.tolist()))


def _level_moments(n: int, g: float, orders) -> dict[int, float]:
    """Moments of S = sum sigma under the mean-field block weight."""
    k = np.arange(n + 1, dtype=np.float64)
    s = 2.0 * k - n
    logw = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + (g / n) * s**2
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    return {p: float(np.sum(w * s**p)) for p in orders}


def block_moments(params: BlockParams, orders=(2, 4, 6)) -> dict[int, float]:
    lv = _level_moments(params.N, params.g, orders)
    scale = params.alpha / math.sqrt(params.N)
    return {p: scale**p * lv[p] for p in orders}


def target_moments(target: TargetMeasure, max_order: int) -> list[float]:
    """Even moments up to max_order by adaptive quadrature (odd ones vanish)."""
    if max_order % 2:
        raise ValueError("max_order must be even")

    def raw(p: int) -> float:
        val, err = integrate.quad(
            lambda x: x**p * math.exp(-target.lam * x**4 + target.b * x**2),
            0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200,
        )
        return 2.0 * val

    norm = raw(0)
    out = []
    for p in range(1, max_order + 1):
        out.append(0.0 if p % 2 else raw(p) / norm)
    return out


def tune(n: int, target: TargetMeasure, g_max: float = 64.0) -> tuple[BlockParams, float]:
    """Find (alpha, g) whose block matches the target's second and fourth
    moments; returns the parameters and the residual of the match.

    alpha only rescales, so the dimensionless ratio <S^4>/<S^2>^2 pins g by a
    one-parameter root find and alpha follows from the second moment.
    """
    if target.lam <= 0:
        raise TuningError("tuning requires lambda > 0")
    tm = target_moments(target, 4)
    m2t, m4t = tm[1], tm[3]
    ratio_target = m4t / m2t**2

    def ratio_gap(g: float) -> float:
        lv = _level_moments(n, g, (2, 4))
        return lv[4] / lv[2] ** 2 - ratio_target

    lo, hi = 0.0, 1.5
    f_lo = ratio_gap(lo)
    if f_lo <= 0:
        raise TuningError(
            f"N = {n} block is already below the target kurtosis at g = 0; "
            "no mean-field weight can match both moments"
        )
    while ratio_gap(hi) > 0:
        hi *= 2.0
        if hi > g_max:
            raise TuningError(f"no sign change in g up to {g_max}; target unreachable")
    g_star = optimize.brentq(ratio_gap, lo, hi, xtol=1e-13, rtol=1e-15)
    lv2 = _level_moments(n, g_star, (2,))[2]
    alpha = math.sqrt(m2t * n / lv2)
    params = BlockParams(N=n, alpha=alpha, g=g_star)
    got = block_moments(params, (2, 4))
    residual = abs(got[2] - m2t) / m2t + abs(got[4] - m4t) / m4t
    return params, residual
