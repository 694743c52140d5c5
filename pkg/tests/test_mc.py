import math

import numpy as np
import pytest

from currentlab.currents import CurrentEnsemble
from currentlab.exact import ExactGibbs, ThermoParams
from currentlab.graphs import LatticeSpec, build_lattice, cycle_graph, single_edge
from currentlab.mc import RunConfig, wolff_run
from currentlab.mc.betac import CrossingError, locate_beta_c
from currentlab.mc.intersect import intersection_stats
from currentlab.mc.stats import Estimate, StatsError, binned_estimate, jackknife, merge_estimates
from currentlab.mc.wolff import centered_block, lattice_shape, wolff_bin_means
from currentlab.mc.worm import WormChain, initial_current, worm_run


# ---------------------------------------------------------------- estimators


def test_binned_estimate_iid(rng):
    data = rng.normal(size=4096)
    est = binned_estimate(data, 32)
    assert est.mean == pytest.approx(float(data[: 4096].mean()), abs=1e-12)
    assert abs(est.mean) < 5 * est.error


def test_binned_estimate_requires_enough_samples():
    with pytest.raises(StatsError):
        binned_estimate([1.0, 2.0], 8)


def test_jackknife_ratio_recovers_value(rng):
    a = rng.normal(loc=2.0, size=64)
    b = rng.normal(loc=4.0, size=64)
    est = jackknife(lambda x, y: x / y, a, b)
    assert est.mean == pytest.approx(a.mean() / b.mean(), rel=1e-12)
    assert est.error > 0


def test_merge_estimates():
    e1 = Estimate(mean=1.0, error=0.1, bins=8, samples=100)
    e2 = Estimate(mean=2.0, error=0.1, bins=8, samples=300)
    merged = merge_estimates([e1, e2])
    assert merged.mean == pytest.approx(1.75)
    assert merged.samples == 400


# -------------------------------------------------------------------- wolff


def test_wolff_single_edge_s2():
    cfg = RunConfig(graph=single_edge(1.0), beta=0.5, sweeps=22000,
                    thermalization=2000, seed=11,
                    estimators=("s2pair:0,1",), bins=32)
    est = wolff_run(cfg)["s2pair:0,1"]
    assert est.consistent_with(math.tanh(0.5))


def test_wolff_beta_zero_uncorrelated():
    cfg = RunConfig(graph=single_edge(1.0), beta=0.0, sweeps=22000,
                    thermalization=2000, seed=3,
                    estimators=("s2pair:0,1",), bins=32)
    est = wolff_run(cfg)["s2pair:0,1"]
    assert abs(est.mean) <= 4 * est.error


def test_wolff_torus_matches_exact():
    g = build_lattice(LatticeSpec(d=2, L=4, bc="periodic"))
    gibbs = ExactGibbs(g, ThermoParams(0.4))
    cfg = RunConfig(graph=g, beta=0.4, sweeps=30000, thermalization=2000,
                    seed=5, estimators=("s2pair:0,1", "m2", "binder", "block:2"),
                    bins=32)
    out = wolff_run(cfg)
    assert out["s2pair:0,1"].consistent_with(gibbs.correlation((0, 1)))
    assert out["m2"].consistent_with(
        gibbs.weighted_moments(np.ones(16) / 16, (2,))[2])
    blk = np.zeros(16)
    blk[centered_block(g, 2)] = 1.0
    mom = gibbs.weighted_moments(blk, (2, 4))
    assert out["block2:2"].consistent_with(mom[2])
    assert out["block4:2"].consistent_with(mom[4])
    assert out["binder"].mean <= 2.0 / 3.0
    assert -4 * out["rl:2"].error <= out["rl:2"].mean <= 2.0 + 4 * out["rl:2"].error


def test_wolff_deterministic():
    cfg = RunConfig(graph=single_edge(1.0), beta=0.5, sweeps=6000,
                    thermalization=1000, seed=11,
                    estimators=("s2pair:0,1",), bins=16)
    assert wolff_run(cfg) == wolff_run(cfg)


def test_metropolis_fallback():
    g = cycle_graph(4, 1.0)
    gibbs = ExactGibbs(g, ThermoParams(0.45))
    cfg = RunConfig(graph=g, beta=0.45, sweeps=9000, thermalization=1000,
                    seed=2, estimators=("s2pair:0,1",), bins=16,
                    algorithm="metropolis")
    est = wolff_run(cfg)["s2pair:0,1"]
    assert est.consistent_with(gibbs.correlation((0, 1)), n_sigma=4.5)


def test_run_config_validation():
    g = single_edge(1.0)
    with pytest.raises(ValueError, match="bin count"):
        RunConfig(graph=g, beta=0.5, sweeps=100, bins=4)
    with pytest.raises(ValueError, match="exceed"):
        RunConfig(graph=g, beta=0.5, sweeps=100, thermalization=200)
    with pytest.raises(StatsError, match="bins"):
        wolff_run(RunConfig(graph=g, beta=0.5, sweeps=40, thermalization=20,
                            bins=32, estimators=("m2",)))


def test_lattice_helpers():
    g = build_lattice(LatticeSpec(d=2, L=4, bc="periodic"))
    assert lattice_shape(g) == (4, 4)
    assert len(centered_block(g, 2)) == 4
    with pytest.raises(ValueError):
        centered_block(g, 5)


def test_wolff_bin_means_columns():
    g = build_lattice(LatticeSpec(d=2, L=4, bc="periodic"))
    cfg = RunConfig(graph=g, beta=0.3, sweeps=4000, thermalization=800,
                    seed=1, estimators=("m2", "prod:0,1,2,3"), bins=8)
    cols = wolff_bin_means(cfg)
    assert set(cols) == {"m2", "m4", "prod:0,1,2,3"}
    assert all(v.shape == (8,) for v in cols.values())


# --------------------------------------------------------------------- worm


def test_worm_single_edge_sector_empty():
    cfg = RunConfig(graph=single_edge(1.0), beta=1.0, sweeps=120000,
                    thermalization=2000, seed=4,
                    estimators=("edges", "support", "s2pair:0,1"),
                    bins=32, measure_every=2)
    samples, est = worm_run(cfg, ())
    assert est["p_odd:0"].mean == 0.0  # parity forbids odd occupation
    exact_occ = (math.cosh(1.0) - 1.0) / math.cosh(1.0)
    assert est["p_occ:0"].consistent_with(exact_occ)
    assert est["s2:0,1"].consistent_with(math.tanh(1.0))
    assert len(samples) > 0


def test_worm_single_edge_sourced():
    cfg = RunConfig(graph=single_edge(1.0), beta=1.0, sweeps=60000,
                    thermalization=2000, seed=7, estimators=("edges",),
                    bins=32, measure_every=2)
    _, est = worm_run(cfg, (0, 1))
    assert est["p_odd:0"].mean == 1.0  # parity forces odd occupation


def test_worm_matches_exact_marginals():
    g = cycle_graph(4, 1.1)
    ens = CurrentEnsemble(g, 0.8)
    marg = ens.edge_marginals((0, 2))
    cfg = RunConfig(graph=g, beta=0.8, sweeps=250000, thermalization=5000,
                    seed=12, estimators=("edges", "support"), bins=16,
                    measure_every=4)
    _, est = worm_run(cfg, (0, 2))
    for k in range(4):
        assert est[f"p_odd:{k}"].consistent_with(marg["p_odd"][k], n_sigma=4.5)
        assert est[f"p_occ:{k}"].consistent_with(marg["p_occupied"][k], n_sigma=4.5)


def test_worm_rejects_odd_sources():
    with pytest.raises(ValueError, match="even"):
        worm_run(RunConfig(graph=single_edge(1.0), beta=0.5, sweeps=1000,
                           thermalization=100, bins=8, estimators=()), (0,))


def test_worm_unreachable_sources():
    from currentlab.graphs import CouplingGraph

    g = CouplingGraph(n_vertices=3, edges=((0, 1, 1.0),))
    with pytest.raises(ValueError, match="component"):
        initial_current(g, (0, 2))


def test_worm_detailed_balance():
    """pi(a) P(a->b) == pi(b) P(b->a) along a sampled trajectory."""
    chain = WormChain(cycle_graph(4, 1.1), 0.8, (0, 2), seed=99)
    prev = chain.state()
    checked = 0
    for _ in range(3000):
        chain.step()
        cur = chain.state()
        if cur != prev:
            forward = chain.stationary_weight(prev) * chain.transition_density(prev, cur)
            backward = chain.stationary_weight(cur) * chain.transition_density(cur, prev)
            assert forward == pytest.approx(backward, rel=1e-12)
            checked += 1
        prev = cur
    assert checked > 500


def test_worm_deterministic():
    cfg = RunConfig(graph=cycle_graph(4, 1.0), beta=0.7, sweeps=30000,
                    thermalization=1000, seed=3, estimators=("edges",),
                    bins=16, measure_every=2)
    _, a = worm_run(cfg, ())
    _, b = worm_run(cfg, ())
    assert a == b


# ------------------------------------------------------------- intersection


def test_intersection_shared_vertex_certain():
    g = cycle_graph(4, 1.0)
    cfg = RunConfig(graph=g, beta=0.6, sweeps=40000, thermalization=2000,
                    seed=5, bins=8, estimators=(), measure_every=4)
    stats = intersection_stats(cfg, 0, 1, 0, 2)  # x1 == x3 == 0
    assert stats.p_nonempty.mean == 1.0
    assert stats.p_nonempty.error == 0.0


def test_intersection_ratio_identity_single_edge():
    g = single_edge(1.0)
    cfg = RunConfig(graph=g, beta=0.9, sweeps=60000, thermalization=2000,
                    seed=6, bins=8, estimators=(), measure_every=4)
    stats = intersection_stats(cfg, 0, 0, 1, 1)
    assert stats.ratio_residual <= 1e-12
    assert stats.mean_size.mean >= 0.0


def test_intersection_matches_exact_probability():
    from currentlab.currents import ClustersIntersect, replica_probability

    g = build_lattice(LatticeSpec(d=2, L=3, bc="free"))  # 12 edges
    beta = 0.5
    pts = (0, 2, 6, 8)
    cfg = RunConfig(graph=g, beta=beta, sweeps=250000, thermalization=5000,
                    seed=9, bins=16, estimators=(), measure_every=4)
    stats = intersection_stats(cfg, *pts)
    srcs = [frozenset((pts[0],)) ^ frozenset((pts[1],)),
            frozenset((pts[2],)) ^ frozenset((pts[3],)),
            frozenset(), frozenset()]
    exact = replica_probability(
        g, beta, srcs, ClustersIntersect(pts[0], pts[2], groups=((0, 2), (1, 3))))
    assert stats.p_nonempty.consistent_with(exact, n_sigma=4.5)


# ------------------------------------------------------------------- beta_c


def test_locate_beta_c_needs_two_sizes():
    with pytest.raises(ValueError):
        locate_beta_c(d=2, sizes=(8,), bracket=(0.4, 0.48), sweeps=2000)


def test_locate_beta_c_no_crossing_in_1d():
    with pytest.raises(CrossingError):
        locate_beta_c(d=1, sizes=(8, 16), bracket=(0.3, 1.2), sweeps=8000,
                      thermalization=1000, seed=1, bins=16)
