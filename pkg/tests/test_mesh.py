import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmfem.mesh import (ABSORBING, DIRICHLET, MeshError, MeshFormatError,
                          build_cartesian_mesh, element_geometry, load_mesh,
                          refine, save_mesh, uniform_refine, validate_mesh,
                          vertex_patch)
from helmfem.assets import scattering_mesh


def test_cartesian_counts_n3():
    m = build_cartesian_mesh(3)
    assert m.num_vertices == 16
    assert m.num_triangles == 18
    h = m.element_size()
    assert np.allclose(h, 2 * np.sqrt(2) / 3)
    assert abs(h[0] - 0.9428) < 5e-4
    assert set(m.boundary_tags) == {ABSORBING}
    validate_mesh(m)


def test_cartesian_minimal_and_n8():
    m1 = build_cartesian_mesh(1)
    assert m1.num_vertices == 4 and m1.num_triangles == 2
    m8 = build_cartesian_mesh(8)
    assert m8.num_triangles == 128
    assert np.allclose(m8.element_size(), 2 * np.sqrt(2) / 8)


def test_cartesian_orientation_and_diagonal():
    m = build_cartesian_mesh(4)
    _, det, _ = m.affine_maps
    assert np.all(det > 0)
    # every diagonal runs lower-left to upper-right
    for tri in m.triangles:
        v = m.vertices[tri]
        d = v.max(axis=0) - v.min(axis=0)
        assert d[0] > 0 and d[1] > 0


def test_element_geometry_closed_forms():
    m = build_cartesian_mesh(2, lo=0.0, hi=2.0)  # right isosceles, legs 1
    g = element_geometry(m, 0)
    assert abs(g.h - np.sqrt(2)) < 1e-14
    assert abs(g.rho - (2 - np.sqrt(2)) / 2) < 1e-14
    assert abs(g.kappa - 0.2071) < 5e-5
    assert 0 < g.kappa < 1

    equilateral = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    from helmfem.mesh import Mesh
    me = Mesh(equilateral, np.array([[0, 1, 2]]),
              np.array([[0, 1], [1, 2], [2, 0]]), np.array(["A", "A", "A"]))
    ge = element_geometry(me, 0)
    assert abs(ge.h - 1.0) < 1e-14
    assert abs(ge.rho - 1 / (2 * np.sqrt(3))) < 1e-14


def test_degenerate_triangle_errors():
    from helmfem.mesh import Mesh
    flat = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]),
                np.array([[0, 1, 2]]),
                np.empty((0, 2), dtype=int), np.empty(0, dtype='<U1'))
    with pytest.raises(MeshError):
        element_geometry(flat, 0)


def test_save_load_round_trip(tmp_path):
    m = build_cartesian_mesh(3)
    path = tmp_path / "mesh.txt"
    save_mesh(m, path)
    m2 = load_mesh(path)
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.array_equal(m.boundary_edges, m2.boundary_edges)
    assert np.array_equal(m.boundary_tags, m2.boundary_tags)
    assert np.array_equal(m.refinement_edge, m2.refinement_edge)


def test_load_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3 1 0\n0 0\n1 0\n0 1\n0 1 5\n")
    with pytest.raises(MeshFormatError) as exc:
        load_mesh(path)
    assert exc.value.line == 5

    path.write_text("3 1\n")
    with pytest.raises(MeshFormatError) as exc:
        load_mesh(path)
    assert exc.value.line == 1

    path.write_text("3 1 1\n0 0\n1 0\n0 1\n0 1 2\n0 1 X\n")
    with pytest.raises(MeshFormatError) as exc:
        load_mesh(path)
    assert exc.value.line == 6


def test_load_rejects_untagged_boundary(tmp_path):
    path = tmp_path / "untagged.txt"
    path.write_text("3 1 2\n0 0\n1 0\n0 1\n0 1 2\n0 1 A\n1 2 A\n")
    with pytest.raises(MeshFormatError, match="untagged"):
        load_mesh(path)


def test_scattering_asset():
    m = scattering_mesh()
    validate_mesh(m)
    assert m.num_triangles == 44
    assert np.sum(m.boundary_tags == DIRICHLET) == 8
    assert np.sum(m.boundary_tags == ABSORBING) == 16
    # Dirichlet edges on the obstacle 2|x1| - 1/2 < x2 < |x1|
    for (a, b), tag in zip(m.boundary_edges, m.boundary_tags):
        for v in (m.vertices[a], m.vertices[b]):
            if tag == DIRICHLET:
                on_top = abs(v[1] - abs(v[0])) < 1e-12
                on_bot = abs(v[1] - (2 * abs(v[0]) - 0.5)) < 1e-12
                assert on_top or on_bot
            else:
                assert abs(max(abs(v[0]), abs(v[1])) - 1) < 1e-12
    areas = 0.5 * m.affine_maps[1]
    assert abs(areas.sum() - 3.75) < 1e-12 * 3.75


def test_obstacle_corner_patch():
    m = scattering_mesh()
    # the obstacle wing tip (0.5, 0.5) is a Dirichlet vertex
    tip = int(np.argmin(np.linalg.norm(m.vertices - [0.5, 0.5], axis=1)))
    assert np.allclose(m.vertices[tip], [0.5, 0.5])
    patch = vertex_patch(m, tip)
    assert patch.is_dirichlet_vertex
    assert len(patch.dirichlet_shared) == 2
    for e in patch.dirichlet_shared:
        assert tip in m.edges[e]
        assert e not in patch.constrained_boundary


def test_interior_patch_cartesian():
    m = build_cartesian_mesh(3)
    interior = [v for v in range(m.num_vertices)
                if not np.any(np.abs(np.abs(m.vertices[v]) - 1) < 1e-12)]
    for v in interior:
        patch = vertex_patch(m, v)
        assert len(patch.elements) == 6
        assert not patch.is_dirichlet_vertex
    # on n=4 the center patch stays away from the boundary entirely
    m4 = build_cartesian_mesh(4)
    center = int(np.argmin(np.linalg.norm(m4.vertices, axis=1)))
    patch = vertex_patch(m4, center)
    assert len(patch.elements) == 6
    assert patch.absorbing == [] and patch.dirichlet_shared == []
    assert len(patch.interior_facing) == 6


def test_corner_patch_cartesian():
    m = build_cartesian_mesh(3)
    corner = int(np.argmin(np.linalg.norm(m.vertices - [-1, -1], axis=1)))
    patch = vertex_patch(m, corner)
    assert len(patch.elements) in (1, 2)
    assert len(patch.absorbing) == 2


def test_refine_noop():
    m = build_cartesian_mesh(2)
    m2 = refine(m, [])
    assert m2 is m


def test_refine_all_conforming():
    m = build_cartesian_mesh(2)
    m2 = refine(m, range(m.num_triangles))
    assert m2.num_triangles > m.num_triangles
    validate_mesh(m2)
    assert np.sum(0.5 * m2.affine_maps[1]) == pytest.approx(4.0, rel=1e-13)


def test_refine_single_closure():
    m = build_cartesian_mesh(3)
    m2 = refine(m, [7])
    validate_mesh(m2)
    assert m2.num_triangles > m.num_triangles
    assert np.sum(0.5 * m2.affine_maps[1]) == pytest.approx(4.0, rel=1e-13)


def test_refinement_shape_regularity():
    m = build_cartesian_mesh(2)
    kappa0 = min(element_geometry(m, t).kappa for t in range(m.num_triangles))
    m10 = uniform_refine(m, 10)
    kappa10 = min(element_geometry(m10, t).kappa for t in range(m10.num_triangles))
    assert kappa10 >= 0.49 * kappa0
    assert np.sum(0.5 * m10.affine_maps[1]) == pytest.approx(4.0, rel=1e-12)


def test_scattering_refinement_regularity():
    m = scattering_mesh()
    kappa0 = min(element_geometry(m, t).kappa for t in range(m.num_triangles))
    m4 = uniform_refine(m, 4)
    validate_mesh(m4)
    kappa4 = min(element_geometry(m4, t).kappa for t in range(m4.num_triangles))
    assert kappa4 >= 0.49 * kappa0
    assert np.sum(0.5 * m4.affine_maps[1]) == pytest.approx(3.75, rel=1e-12)


@given(st.lists(st.integers(0, 17), max_size=6), st.integers(0, 3))
@settings(max_examples=25, deadline=None)
def test_refine_random_marks_conform(marks, rounds):
    m = build_cartesian_mesh(3)
    for _ in range(rounds + 1):
        m = refine(m, [x % m.num_triangles for x in marks])
    validate_mesh(m)
    assert np.sum(0.5 * m.affine_maps[1]) == pytest.approx(4.0, rel=1e-12)
