import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import Delaunay

from screenmesh.halfedge import HalfedgeMesh, MeshError
from screenmesh.remesher import initial_triangulation


def square():
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    return HalfedgeMesh.from_faces(verts, faces)


def grid(n):
    verts, faces = initial_triangulation(np.ones((n, n), bool))
    return HalfedgeMesh.from_faces(verts, faces)


def hex_fan():
    ang = np.arange(6) * np.pi / 3
    verts = np.vstack([[0, 0], np.column_stack([np.cos(ang), np.sin(ang)])])
    faces = np.array([[0, 1 + i, 1 + (i + 1) % 6] for i in range(6)])
    return HalfedgeMesh.from_faces(verts, faces)


def counts(m):
    return m.n_vertices, m.n_edges, m.n_faces


def interior_edge(m):
    return next(e for e in m.live_edges() if not m.is_boundary_edge(e))


def boundary_edge(m):
    return next(e for e in m.live_edges() if m.is_boundary_edge(e))


def test_split_interior_edge_of_square():
    m = square()
    V, E, F = counts(m)
    m.edge_split(interior_edge(m))
    assert counts(m) == (V + 1, E + 3, F + 2)
    m.validate()


def test_split_boundary_edge():
    m = square()
    V, E, F = counts(m)
    m.edge_split(boundary_edge(m))
    assert counts(m) == (V + 1, E + 2, F + 1)
    m.validate()


def test_split_midpoint():
    verts = np.array([[0, 0], [2, 0], [1, 1]], dtype=float)
    m = HalfedgeMesh.from_faces(verts, np.array([[0, 1, 2]]))
    e = m.find_halfedge(0, 1) >> 1
    v = m.edge_split(e)
    assert m.position(v) == (1.0, 0.0)


def test_split_sets_mean_sizing():
    m = square()
    m.L = [1.0, 2.0, 3.0, 4.0]
    m.kappa = [0.1, 0.2, 0.3, 0.4]
    e = m.find_halfedge(0, 2) >> 1
    v = m.edge_split(e)
    assert m.L[v] == 2.0 and m.kappa[v] == pytest.approx(0.2)


def test_legal_interior_collapse():
    m = grid(4)
    V, E, F = counts(m)
    v = 2 * 5 + 2  # corner (2, 2) of the 4x4 pixel grid is interior
    assert not m.is_boundary_vertex(v)
    h = m.outgoing(v)[0]
    assert m.edge_collapse(h >> 1)
    assert counts(m) == (V - 1, E - 3, F - 2)
    m.validate()


def test_collapse_link_condition_rejected():
    # minimal fan: triangle (0, 1, 2) split at an interior vertex 3. The boundary
    # edge (0, 1) has opposite vertex 3 only, yet 0 and 1 also share neighbour 2.
    verts = np.array([[0, 0], [1, 0], [0.5, 1], [0.5, 0.35]], dtype=float)
    faces = np.array([[0, 1, 3], [1, 2, 3], [2, 0, 3]])
    m = HalfedgeMesh.from_faces(verts, faces)
    h = m.find_halfedge(0, 1)
    assert not m.collapse_topology_ok(h)
    assert not m.collapse_topology_ok(h ^ 1)
    before = m.state()
    assert not m.edge_collapse(h >> 1)
    assert m.state() == before
    # a spoke only shares the two opposite vertices and passes the link test
    assert m.collapse_topology_ok(m.find_halfedge(3, 0))


def test_collapse_single_triangle_rejected():
    tri = HalfedgeMesh.from_faces(np.array([[0, 0], [1, 0], [0, 1.0]]), np.array([[0, 1, 2]]))
    s = tri.state()
    for e in tri.live_edges():
        assert not tri.edge_collapse(e)
    assert tri.state() == s


def test_collapse_inverting_neighbour_rejected():
    m = hex_fan()
    h = m.find_halfedge(1, 0)  # remove boundary vertex 1, move the centre to the target
    assert m.collapse_topology_ok(h)
    assert not m.collapse_geometry_ok(h, (-3.0, 0.0))
    assert m.collapse_geometry_ok(h, (0.1, 0.0))


def test_boundary_interior_collapse_goes_to_boundary():
    m = hex_fan()
    e = m.find_halfedge(0, 1) >> 1
    assert m.edge_collapse(e)
    m.validate()
    live = m.live_vertices()
    assert 0 not in live.tolist() or m.position(0) == (1.0, 0.0)
    assert any(m.position(v) == (1.0, 0.0) for v in live.tolist())


def test_rejected_operations_leave_mesh_identical():
    m = square()
    before = m.state()
    assert not m.edge_flip(boundary_edge(m))
    assert m.state() == before


def test_flip_square_diagonal():
    m = square()
    e = interior_edge(m)
    assert set(m.edge_vertices(e)) == {0, 2}
    assert m.edge_flip(e)
    assert set(m.edge_vertices(e)) == {1, 3}
    m.validate()


def test_flip_twice_restores_connectivity():
    m = grid(3)
    faces0 = {tuple(sorted(f)) for f in m.face_array()[m.live_faces()].tolist()}
    e = interior_edge(m)
    assert m.edge_flip(e)
    assert m.edge_flip(e)
    faces1 = {tuple(sorted(f)) for f in m.face_array()[m.live_faces()].tolist()}
    assert faces0 == faces1
    m.validate()


def test_flip_nonconvex_rejected():
    verts = np.array([[0, 0], [2, 0], [0.5, 0.5], [0, 2]], dtype=float)
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    m = HalfedgeMesh.from_faces(verts, faces)
    before = m.state()
    assert not m.edge_flip(m.find_halfedge(0, 2) >> 1)
    assert m.state() == before


def test_one_ring_hex_fan():
    m = hex_fan()
    nbrs, faces = m.one_ring(0)
    assert len(nbrs) == 6 and len(faces) == 6
    ang = [np.arctan2(m.py[v], m.px[v]) for v in nbrs]
    steps = np.mod(np.diff(ang + ang[:1]), 2 * np.pi)
    assert np.allclose(steps, np.pi / 3)  # counter-clockwise
    for f in faces:
        assert 0 in m.face_vertices(f)


def test_one_ring_square_corner():
    m = square()
    nbrs, faces = m.one_ring(0)
    assert len(nbrs) in (2, 3)
    nbrs1, _ = m.one_ring(1)
    assert len(nbrs1) in (2, 3)


def test_non_manifold_input_rejected():
    verts = np.array([[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    # edge (0, 1) shared by three faces
    faces = np.array([[0, 1, 2], [1, 0, 4], [0, 1, 3]])
    with pytest.raises(MeshError):
        HalfedgeMesh.from_faces(verts, faces)


def test_euler_bookkeeping_multiple_components():
    mask = np.zeros((6, 6), bool)
    mask[0:2, 0:2] = True
    mask[3:6, 3:6] = True
    mask[4, 4] = False  # a hole
    verts, faces = initial_triangulation(mask)
    m = HalfedgeMesh.from_faces(verts, faces)
    m.validate()
    assert len(m.boundary_loops()) == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_random_edit_sequences_stay_valid(seed):
    rng = np.random.default_rng(seed)
    pts = np.vstack([rng.random((20, 2)) * 10, [[0, 0], [10, 0], [10, 10], [0, 10]]])
    tri = Delaunay(pts)
    faces = tri.simplices.copy()
    P = pts[faces]
    area = (P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1]) - (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0])
    faces[area < 0] = faces[area < 0][:, [0, 2, 1]]
    m = HalfedgeMesh.from_faces(pts, faces)
    for _ in range(40):
        live = m.live_edges()
        e = live[rng.integers(len(live))]
        op = rng.integers(3)
        before = m.state()
        if op == 0:
            m.edge_split(e)
        elif op == 1:
            if not m.edge_flip(e):
                assert m.state() == before
        else:
            if not m.edge_collapse(e):
                assert m.state() == before
        m.validate()
    m.compact().validate()
