import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerfem.mesh import (DomainSpec, MeshError, bisect, boundary_nodes, build_domain_mesh,
                            mesh_from_arrays, mesh_size, polygon_area, prolongate_uniform, refine,
                            refine_uniform, square_mesh)


def _edge_triangle_counts(mesh):
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    return counts


def _is_conforming(mesh):
    """Every edge is shared by one or two triangles, no hanging vertex sits on
    an edge interior, and triangle areas add up to the domain area."""
    counts = _edge_triangle_counts(mesh)
    if counts.max() > 2:
        return False
    # hanging nodes: a vertex lying strictly inside some edge
    p = mesh.vertices
    e = mesh.edges
    a, b = p[e[:, 0]], p[e[:, 1]]
    for v in range(mesh.n_vertices):
        d = b - a
        t = np.sum((p[v] - a) * d, axis=1) / np.sum(d * d, axis=1)
        inside = (t > 1e-9) & (t < 1 - 1e-9)
        dist = np.linalg.norm(a + t[:, None] * d - p[v], axis=1)
        if np.any(inside & (dist < 1e-12)):
            return False
    return True


@pytest.mark.parametrize("omega,counts", [
    (3 * math.pi / 4, [19, 61, 217]),
    (3 * math.pi / 2, [33, 113, 417]),
])
def test_vertex_counts_of_the_hierarchy(omega, counts, hierarchies):
    meshes = hierarchies(omega, 3)
    assert [m.n_vertices for m in meshes] == counts


def test_near_slit_counts_close_to_reference(hierarchies):
    meshes = hierarchies(355 * math.pi / 180, 3)
    for m, ref in zip(meshes, [46, 159, 589]):
        assert abs(m.n_vertices - ref) <= 0.1 * ref


def test_coarse_mesh_size_is_half(omega):
    assert mesh_size(build_domain_mesh(DomainSpec(omega))) == pytest.approx(0.5, abs=0.01)


def test_mesh_size_halves(omega, hierarchies):
    h = [mesh_size(m) for m in hierarchies(omega, 4)]
    for a, b in zip(h[1:], h[2:]):
        assert b == pytest.approx(a / 2, rel=1e-12)


def test_refinement_is_conforming_and_area_preserving(omega, hierarchies):
    spec = DomainSpec(omega)
    for m in hierarchies(omega, 3):
        assert np.all(m.signed_areas() > 0)
        assert m.signed_areas().sum() == pytest.approx(spec.area(), rel=1e-12)
        assert _is_conforming(m)


def test_min_angle_bounded_across_levels(omega, hierarchies):
    meshes = hierarchies(omega, 4)
    first = meshes[0].min_angles().min()
    for m in meshes[1:]:
        # uniform bisection creates only finitely many similarity classes
        assert m.min_angles().min() >= first / 2 - 1e-12


def test_quasi_uniformity(omega, hierarchies):
    for m in hierarchies(omega, 4):
        lengths = m.edge_lengths()
        assert lengths.max() / lengths.min() <= 8.0


def test_boundary_loop_geometry(omega, hierarchies):
    spec = DomainSpec(omega)
    for m in hierarchies(omega, 3):
        nodes, segs = boundary_nodes(m)
        assert nodes[0] == nodes[-1]
        assert np.allclose(m.vertices[nodes[0]], 0.0)
        pts = m.vertices[nodes[:-1]]
        assert polygon_area(pts) == pytest.approx(spec.area(), rel=1e-12)
        length = np.linalg.norm(np.diff(m.vertices[nodes], axis=0), axis=1).sum()
        assert length == pytest.approx(spec.perimeter(), rel=1e-12)
        assert np.all(np.diff(segs) >= 0)
        assert segs[0] == 1


def test_segments_cover_the_corners():
    spec = DomainSpec(3 * math.pi / 2)
    m = build_domain_mesh(spec)
    nodes, segs = boundary_nodes(m)
    assert segs.max() == len(spec.corners())
    starts = nodes[:-1][np.r_[True, np.diff(segs) > 0]]
    assert np.allclose(m.vertices[starts], spec.corners())


def test_boundary_edges_lie_on_domain_boundary(omega):
    spec = DomainSpec(omega)
    m = build_domain_mesh(spec)
    counts = _edge_triangle_counts(m)
    assert (counts == 1).sum() == len(m.boundary_edges)
    assert len(m.boundary_vertex_ids) + len(m.interior_vertex_ids) == m.n_vertices


def test_square_mesh():
    m = square_mesh()
    assert m.n_vertices == 13
    assert len(m.boundary_edges) == 8
    assert mesh_size(m) == pytest.approx(1.0)
    assert np.allclose(m.vertices[m.boundary_edges[0, 0]], [-1, -1])
    assert m.signed_areas().sum() == pytest.approx(4.0)


def test_single_triangle_bisection():
    m = mesh_from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    # longest edge is the hypotenuse, so the newest vertex is the right angle
    assert m.triangles[0, 2] == 0
    child = bisect(m, [0])
    assert child.n_triangles == 2
    assert child.n_vertices == 4
    assert np.allclose(child.vertices[3], [0.5, 0.5])
    assert np.allclose(child.signed_areas(), [0.25, 0.25])
    assert set(child.triangles[:, 2]) == {3}
    four = refine_uniform(m)
    assert four.n_triangles == 4
    assert np.allclose(four.signed_areas(), 0.125)


def test_bisection_closure_keeps_conformity():
    m = square_mesh()
    for _ in range(4):
        m = bisect(m, [0])
        assert _is_conforming(m)
        assert m.signed_areas().sum() == pytest.approx(4.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.booleans(), min_size=1))
def test_random_markings_conform(bits):
    m = square_mesh()
    mask = np.resize(np.array(bits, dtype=bool), len(m.edges))
    fine = refine(m, mask)
    assert _is_conforming(fine)
    assert np.all(fine.signed_areas() > 0)
    assert fine.signed_areas().sum() == pytest.approx(4.0)


def test_refine_rejects_bad_mask():
    with pytest.raises(MeshError):
        refine(square_mesh(), np.ones(3, dtype=bool))


def test_prolongation_reproduces_linears(hierarchies):
    coarse, fine = hierarchies(3 * math.pi / 2, 2)
    f = lambda p: 2.0 - p[:, 0] + 3.0 * p[:, 1]
    assert np.allclose(prolongate_uniform(coarse, f(coarse.vertices)), f(fine.vertices))


@pytest.mark.parametrize("bad", [0.0, -1.0, 2 * math.pi, 7.0, float("nan"), 1e-12])
def test_invalid_angles(bad):
    with pytest.raises(MeshError):
        DomainSpec(bad)


def test_polar_angle_folds_the_excluded_wedge():
    spec = DomainSpec(3 * math.pi / 2)
    pts = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    assert np.allclose(spec.polar_angle(pts), [0, math.pi / 2, math.pi, 3 * math.pi / 2])
