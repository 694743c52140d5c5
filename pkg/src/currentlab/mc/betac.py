"""Critical-point location by Binder-cumulant crossings.

Below the transition the cumulant of the larger box lies under that of the
smaller one and above it the order reverses, so the sign of their difference
brackets the crossing; bisection narrows it to the requested width.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..graphs import LatticeSpec, build_lattice
from .wolff import RunConfig, wolff_run


class CrossingError(RuntimeError):
    """No Binder crossing inside the supplied bracket."""


@dataclass
class BetaCEstimate:
    beta_c: float
    half_width: float
    evaluations: list[tuple[float, int, float, float]] = field(default_factory=list)
    # rows: (beta, L, binder mean, binder error)


def locate_beta_c(
    d: int,
    sizes,
    bracket: tuple[float, float],
    sweeps: int = 60000,
    thermalization: int | None = None,
    seed: int = 0,
    bins: int = 32,
    max_iters: int = 12,
    target_width: float = 1e-3,
) -> BetaCEstimate:
    """Bisect the Binder crossing of consecutive box sizes on periodic boxes.

    Returns the bracket midpoint and half-width once the bracket is narrower
    than ``target_width`` (or max_iters bisections have run).
    """
    sizes = sorted(set(int(s) for s in sizes))
    if len(sizes) < 2:
        raise ValueError("need at least two sizes for a crossing")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError("bracket must be an increasing pair")
    evaluations: list[tuple[float, int, float, float]] = []
    graphs = {L: build_lattice(LatticeSpec(d=d, L=L, J=1.0, bc="periodic"))
              for L in sizes}
    eval_count = 0

    def binder(beta: float, L: int) -> tuple[float, float]:
        nonlocal eval_count
        eval_count += 1
        cfg = RunConfig(
            graph=graphs[L], beta=beta, sweeps=sweeps,
            thermalization=thermalization, seed=seed,
            stream=eval_count, estimators=("binder",), bins=bins,
        )
        est = wolff_run(cfg)["binder"]
        evaluations.append((beta, L, est.mean, est.error))
        return est.mean, est.error

    def delta(beta: float) -> float:
        # cumulant of the largest box minus the smallest: negative below the
        # transition, positive above
        small, _ = binder(beta, sizes[0])
        big, _ = binder(beta, sizes[-1])
        return big - small

    d_lo = delta(lo)
    d_hi = delta(hi)
    if not (d_lo < 0 < d_hi):
        raise CrossingError(
            f"no Binder crossing detected in bracket ({lo}, {hi}): "
            f"delta({lo}) = {d_lo:.4f}, delta({hi}) = {d_hi:.4f}"
        )
    for _ in range(max_iters):
        if (hi - lo) / 2 <= target_width:
            break
        mid = 0.5 * (lo + hi)
        if delta(mid) < 0:
            lo = mid
        else:
            hi = mid
    return BetaCEstimate(
        beta_c=0.5 * (lo + hi),
        half_width=0.5 * (hi - lo),
        evaluations=evaluations,
    )
