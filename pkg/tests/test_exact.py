import itertools
import math

import numpy as np
import pytest

from currentlab.exact import (
    CapExceeded,
    ExactGibbs,
    ThermoParams,
    correlation,
    partition_function,
    reduce_multiset,
    ursell4,
)
from currentlab.graphs import CouplingGraph, LatticeSpec, build_lattice, cycle_graph, single_edge


def test_partition_beta_zero():
    assert partition_function(single_edge(1.0), ThermoParams(0.0)) == pytest.approx(4.0)


def test_partition_single_edge():
    z = partition_function(single_edge(1.0), ThermoParams(1.0))
    assert z == pytest.approx(4 * math.cosh(1.0), rel=1e-12)


def test_partition_isolated_vertices():
    g = CouplingGraph(n_vertices=2, edges=())
    assert partition_function(g, ThermoParams(1.7)) == pytest.approx(4.0)


def test_correlation_single_edge():
    c = correlation(single_edge(1.0), ThermoParams(0.8), (0, 1))
    assert c == pytest.approx(math.tanh(0.8), rel=1e-12)


def test_correlation_odd_and_repeated():
    tp = ThermoParams(0.8)
    assert correlation(single_edge(1.0), tp, (0,)) == 0.0
    assert correlation(single_edge(1.0), tp, (0, 0)) == 1.0
    assert reduce_multiset((3, 1, 3, 3)) == (1, 3)


def test_cap_exceeded():
    g = build_lattice(LatticeSpec(d=1, L=30, bc="free"))
    with pytest.raises(CapExceeded):
        partition_function(g, ThermoParams(0.5), cap=24)


def test_ursell4_coincident_points():
    g = cycle_graph(4, 1.0)
    assert ursell4(g, ThermoParams(0.6), 0, 0, 0, 0) == pytest.approx(-2.0)


def test_ursell4_beta_zero():
    g = cycle_graph(4, 1.0)
    assert ursell4(g, ThermoParams(0.0), 0, 1, 2, 3) == pytest.approx(0.0, abs=1e-14)


def test_ursell4_permutation_symmetry(graph_factory):
    g = graph_factory(5, n_min=4)
    tp = ThermoParams(0.9)
    pts = list(range(4))
    base = ursell4(g, tp, *pts)
    for perm in itertools.permutations(pts):
        assert ursell4(g, tp, *perm) == pytest.approx(base, rel=1e-12, abs=1e-14)


def test_ursell4_nonpositive_ferromagnetic(graph_factory, rng):
    for i in range(20):
        g = graph_factory(i, n_min=4)
        beta = float(rng.uniform(0.05, 1.95))
        pts = [int(v) for v in rng.integers(0, g.n_vertices, size=4)]
        assert ursell4(g, ThermoParams(beta), *pts) <= 1e-12


def test_griffiths_monotonicity(graph_factory):
    # pair correlations grow with beta on ferromagnetic graphs
    for i in range(20):
        g = graph_factory(100 + i)
        gibbs_lo = ExactGibbs(g, ThermoParams(0.3))
        gibbs_hi = ExactGibbs(g, ThermoParams(0.5))
        lo = gibbs_lo.s2_table()
        hi = gibbs_hi.s2_table()
        assert np.all(hi >= lo - 1e-12)


def test_correlations_bounded(graph_factory, rng):
    for i in range(10):
        g = graph_factory(200 + i)
        gibbs = ExactGibbs(g, ThermoParams(float(rng.uniform(0, 2))))
        table = gibbs.s2_table()
        assert np.all(table <= 1.0 + 1e-12)
        assert np.all(table >= -1.0 - 1e-12)


def test_external_field_supported():
    g = single_edge(1.0)
    gibbs = ExactGibbs(g, ThermoParams(0.5, h=0.3))
    # single-site expectation no longer vanishes in a field
    assert gibbs.correlation((0,)) > 0.1


def test_weighted_moments_match_correlations():
    g = cycle_graph(4, 0.9)
    gibbs = ExactGibbs(g, ThermoParams(0.55))
    table = gibbs.s2_table()
    m = gibbs.weighted_moments(np.ones(4), (2,))
    assert m[2] == pytest.approx(float(table.sum()), rel=1e-12)


def test_mgf_consistent_with_moments():
    g = cycle_graph(4, 0.9)
    gibbs = ExactGibbs(g, ThermoParams(0.55))
    f = np.array([0.5, -0.25, 1.0, 0.0])
    mom = gibbs.weighted_moments(f, (2, 4))
    z = 0.11
    series = 1 + z**2 * mom[2] / 2 + z**4 * mom[4] / 24
    mgf = gibbs.mgf(f, [z])[0]
    assert mgf == pytest.approx(series, abs=1e-6)
