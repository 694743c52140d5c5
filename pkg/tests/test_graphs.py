import json

import pytest

from currentlab.graphs import (
    CouplingGraph,
    GraphError,
    LatticeSpec,
    build_decorated,
    build_lattice,
    cycle_graph,
    load_graph,
    save_graph,
    single_edge,
)


def test_periodic_2d_counts():
    g = build_lattice(LatticeSpec(d=2, L=4, J=1.0, bc="periodic"))
    assert g.n_vertices == 16
    assert g.n_edges == 32  # d * L^d


def test_free_1d_path():
    g = build_lattice(LatticeSpec(d=1, L=3, J=1.0, bc="free"))
    assert g.n_vertices == 3
    assert g.n_edges == 2


def test_periodic_L2_rejected():
    with pytest.raises(GraphError):
        LatticeSpec(d=1, L=2, J=1.0, bc="periodic")


def test_free_edge_count_3d():
    g = build_lattice(LatticeSpec(d=3, L=3, bc="free"))
    assert g.n_edges == 3 * 3**2 * 2  # d * L^(d-1) * (L-1)


def test_lattice_deterministic():
    a = build_lattice(LatticeSpec(d=2, L=5, J=0.7, bc="periodic"))
    b = build_lattice(LatticeSpec(d=2, L=5, J=0.7, bc="periodic"))
    assert a == b


def test_free_2d_has_boundary_face():
    g = build_lattice(LatticeSpec(d=2, L=4, bc="free"))
    face = g.boundary_face
    assert face is not None
    assert len(face) == 12
    assert len(set(face)) == 12
    # consecutive face vertices are lattice neighbors
    pairs = {(min(u, v), max(u, v)) for u, v, _ in g.edges}
    for i, v in enumerate(face):
        u = face[(i + 1) % len(face)]
        assert (min(u, v), max(u, v)) in pairs


def test_site_cap():
    with pytest.raises(GraphError, match="cap"):
        build_lattice(LatticeSpec(d=3, L=300, bc="periodic", site_cap=1000))


def test_validation_rejects_bad_edges():
    with pytest.raises(GraphError, match="negative"):
        CouplingGraph(n_vertices=2, edges=((0, 1, -0.5),))
    with pytest.raises(GraphError, match="self-loop"):
        CouplingGraph(n_vertices=2, edges=((1, 1, 0.5),))
    with pytest.raises(GraphError, match="duplicate"):
        CouplingGraph(n_vertices=2, edges=((0, 1, 0.5), (1, 0, 0.3)))
    with pytest.raises(GraphError, match="undeclared"):
        CouplingGraph(n_vertices=2, edges=((0, 2, 0.5),))


def test_decorated_single_vertex():
    base = CouplingGraph(n_vertices=1, edges=())
    dec = build_decorated(base, N=2, alpha=1.0, g=1.0)
    assert dec.n_vertices == 2
    assert dec.edges == ((0, 1, 0.5),)  # one pair at strength g alpha^2 / N


def test_decorated_n1_isomorphic_to_base():
    base = single_edge(1.0)
    dec = build_decorated(base, N=1, alpha=1.0, g=0.0)
    assert dec.n_vertices == 2
    assert dec.edges == ((0, 1, 1.0),)


def test_decorated_edge_counts():
    base = single_edge(1.0)
    dec = build_decorated(base, N=2, alpha=1.0, g=1.0)
    assert dec.n_vertices == 4
    intra = [e for e in dec.edges if e[0] // 2 == e[1] // 2]
    inter = [e for e in dec.edges if e[0] // 2 != e[1] // 2]
    assert len(intra) == 2
    assert len(inter) == 4
    assert dec.blocks == ((0, 1), (2, 3))


def test_decorated_coupling_sum():
    # total inter-block coupling equals alpha^2 J N
    base = single_edge(0.8)
    for n, alpha in ((3, 1.2), (5, 0.6)):
        dec = build_decorated(base, N=n, alpha=alpha, g=0.4)
        inter = sum(j for u, v, j in dec.edges if u // n != v // n)
        assert inter == pytest.approx(alpha**2 * 0.8 * n, rel=1e-12)


def test_graph_file_round_trip(tmp_path):
    g = build_lattice(LatticeSpec(d=2, L=3, J=0.85, bc="free"))
    path = tmp_path / "g.json"
    save_graph(g, path)
    g2 = load_graph(path)
    assert g2 == g


def test_load_graph_valid_two_vertex(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"vertices": 2, "edges": [[0, 1, 1.5]]}))
    g = load_graph(path)
    assert g.n_edges == 1


def test_load_graph_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"vertices": 2, "edges": [[0, 1, -0.5]]}))
    with pytest.raises(GraphError, match="negative"):
        load_graph(path)
    path.write_text(json.dumps({"vertices": 2, "edges": [[0, 2, 0.5]]}))
    with pytest.raises(GraphError, match="undeclared"):
        load_graph(path)
    path.write_text("{not json")
    with pytest.raises(GraphError, match="JSON"):
        load_graph(path)


def test_boundary_face_validation():
    with pytest.raises(GraphError, match="distinct"):
        CouplingGraph(n_vertices=4,
                      edges=((0, 1, 1.0), (1, 2, 1.0)),
                      boundary_face=(0, 1, 1))


def test_cycle_graph_face():
    g = cycle_graph(5, 0.5)
    assert g.n_edges == 5
    assert g.boundary_face == (0, 1, 2, 3, 4)
