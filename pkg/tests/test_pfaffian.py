import math

import numpy as np
import pytest

from currentlab.currents import SetsLinked, replica_probability
from currentlab.exact import ExactGibbs, ThermoParams, ursell4
from currentlab.graphs import LatticeSpec, build_lattice, cycle_graph
from currentlab.pfaffian import (
    Pairing,
    PfaffianError,
    _pfaffian_parlett_reid,
    all_pairings,
    boundary_pfaffian_residual,
    crossing_sign,
    pfaffian,
    skew_from_upper,
)


def test_pairing_validation():
    Pairing(((0, 1), (2, 3)))
    with pytest.raises(PfaffianError):
        Pairing(((0, 0), (1, 2)))
    with pytest.raises(PfaffianError):
        Pairing(((0, 1), (1, 2)))
    p = Pairing.from_involution([1, 0, 3, 2])
    assert p.pairs == ((0, 1), (2, 3))


def test_all_pairings_count():
    assert len(list(all_pairings(list(range(6))))) == 15
    assert len(list(all_pairings(list(range(8))))) == 105


def test_pfaffian_two_by_two():
    a = skew_from_upper(np.array([[0.0, 2.5], [0.0, 0.0]]))
    assert pfaffian(a) == 2.5


def test_pfaffian_four_by_four(rng):
    m = skew_from_upper(rng.normal(size=(4, 4)))
    expected = m[0, 1] * m[2, 3] - m[0, 2] * m[1, 3] + m[0, 3] * m[1, 2]
    assert pfaffian(m) == pytest.approx(expected, rel=1e-12)


def test_pfaffian_squared_is_determinant(rng):
    for dim in (6, 8, 10, 14):
        m = skew_from_upper(rng.normal(size=(dim, dim)))
        det = np.linalg.det(m)
        assert pfaffian(m) ** 2 == pytest.approx(det, rel=1e-9)


def test_parlett_reid_matches_direct(rng):
    for _ in range(5):
        m = skew_from_upper(rng.normal(size=(8, 8)))
        assert _pfaffian_parlett_reid(m.copy()) == pytest.approx(
            pfaffian(m), rel=1e-9)


def test_pfaffian_rejects_bad_input():
    with pytest.raises(PfaffianError, match="even"):
        pfaffian(np.zeros((3, 3)))
    with pytest.raises(PfaffianError, match="antisymmetric"):
        pfaffian(np.ones((2, 2)))


def test_crossing_sign_examples():
    assert crossing_sign([1, 2, 3, 4], [(0, 1), (2, 3)]) == 1
    assert crossing_sign([1, 2, 3, 4], [(0, 2), (1, 3)]) == -1
    # two crossing chord pairs cancel
    assert crossing_sign([0, 1, 2, 3, 4, 5], [(0, 2), (1, 4), (3, 5)]) == 1


def test_crossing_sign_rotation_invariant():
    pairing = [(0, 3), (1, 4), (2, 5)]
    base = crossing_sign([0, 1, 2, 3, 4, 5], pairing)
    for rot in range(1, 6):
        pos = [(p + rot) % 6 for p in range(6)]
        assert crossing_sign(pos, pairing) == base


def test_crossing_sign_rejects_duplicates():
    with pytest.raises(PfaffianError, match="distinct"):
        crossing_sign([0, 0, 1, 2], [(0, 1), (2, 3)])


def test_boundary_residual_two_points():
    g = cycle_graph(4, 1.0)
    assert boundary_pfaffian_residual(g, 0.7, [0, 2]) == 0.0


def test_boundary_residual_4cycle():
    g = cycle_graph(4, 1.0)
    assert boundary_pfaffian_residual(g, 0.7, [0, 1, 2, 3]) <= 1e-10


def test_boundary_residual_3x3_corners():
    g = build_lattice(LatticeSpec(d=2, L=3, bc="free"))
    corners = [0, 2, 8, 6]
    assert boundary_pfaffian_residual(g, 0.4, corners) <= 1e-9


def test_boundary_residual_4x4_six_points():
    g = build_lattice(LatticeSpec(d=2, L=4, bc="free"))
    face = g.boundary_face
    pts = [face[i] for i in (0, 2, 4, 6, 8, 10)]
    assert boundary_pfaffian_residual(g, 0.7, pts) <= 1e-9


def test_boundary_residual_point_validation():
    g = build_lattice(LatticeSpec(d=2, L=3, bc="free"))
    with pytest.raises(PfaffianError, match="face"):
        boundary_pfaffian_residual(g, 0.4, [0, 2, 8, 4])  # 4 is the center
    with pytest.raises(PfaffianError, match="distinct"):
        boundary_pfaffian_residual(g, 0.4, [0, 0, 2, 8])
    with pytest.raises(PfaffianError, match="even"):
        boundary_pfaffian_residual(g, 0.4, [0, 2, 8])


def test_four_point_residual_equals_u4_relation():
    """For cyclically ordered boundary points the pairing identity is the
    statement U4 = -2 S2(x1,x3) S2(x2,x4)."""
    g = build_lattice(LatticeSpec(d=2, L=3, bc="free"))
    face = g.boundary_face
    pts = [face[0], face[2], face[4], face[6]]
    beta = 0.45
    gibbs = ExactGibbs(g, ThermoParams(beta))
    u4 = ursell4(g, ThermoParams(beta), *pts)
    target = -2 * gibbs.correlation((pts[0], pts[2])) * \
        gibbs.correlation((pts[1], pts[3]))
    assert u4 == pytest.approx(target, rel=1e-10)
    assert boundary_pfaffian_residual(g, beta, pts) <= 1e-10


def test_intertwined_sources_always_linked():
    g = cycle_graph(4, 1.0)
    p = replica_probability(
        g, 0.8, [(0, 2), (1, 3)],
        SetsLinked(xs=(0, 2), ys=(1, 3), groups=((0, 1),)))
    assert p == pytest.approx(1.0, rel=1e-12)


def test_nonplanar_marking_gives_nonzero_residual():
    # complete graph on 5 vertices marked as if its outer cycle were a face
    from currentlab.graphs import CouplingGraph

    edges = tuple((a, b, 1.0) for a in range(5) for b in range(a + 1, 5))
    g = CouplingGraph(n_vertices=5, edges=edges, boundary_face=(0, 1, 2, 3, 4))
    res = boundary_pfaffian_residual(g, 0.5, [0, 1, 2, 3])
    assert res > 1e-4
