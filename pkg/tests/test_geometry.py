import math
from dataclasses import asdict, replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnray import kernels
from pinnray.errors import GeometryError, MeshParseError
from pinnray.geometry import (
    Domain2D,
    FinRayParams,
    TriangleMesh,
    build_finray,
    forced_point,
    marker_locations,
    parse_mesh,
    polygon_area,
    rectangle,
    sample_boundary,
    sample_collocation,
    sample_polyline,
    structured_rectangle,
    triangulate,
    write_mesh,
)

BASE = FinRayParams()

UNIT_SQUARE_MSH = """$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
1
1 1 "base"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
3
1 1 2 1 1 1 2
2 2 2 0 1 1 2 3
3 2 2 0 1 1 3 4
$EndElements
"""


# Fin Ray construction ------------------------------------------------------------

def test_default_design_has_five_holes():
    d = build_finray(BASE)
    assert len(d.holes) == 5
    assert set(d.edges) == {"base", "front", "back", "tip"}
    base = d.edges["base"]
    assert np.all(base[:, 1] == 0.0)
    assert base[:, 0].min() == 0.0 and base[:, 0].max() == BASE.L


def test_area_bookkeeping():
    d = build_finray(BASE)
    outer = polygon_area(d.outer)
    holes = sum(-polygon_area(h) for h in d.holes)
    assert outer > 0 and all(polygon_area(h) < 0 for h in d.holes)
    assert d.area == pytest.approx(outer - holes, rel=1e-14)


def test_outline_matches_parameters():
    d = build_finray(BASE)
    a = math.radians(BASE.L_angle)
    tip = np.array([0.0, BASE.H])
    top_back = np.array([BASE.L_tip * math.sin(a), BASE.H - BASE.L_tip * math.cos(a)])
    assert any(np.allclose(p, tip) for p in d.outer)
    assert any(np.allclose(p, top_back) for p in d.outer)
    assert np.linalg.norm(top_back - tip) == pytest.approx(BASE.L_tip)


def test_no_ribs_gives_single_void():
    d = build_finray(replace(BASE, N=0))
    assert len(d.holes) == 1


def test_overlapping_walls_are_rejected():
    with pytest.raises(GeometryError, match="overlap"):
        build_finray(replace(BASE, t_flex=16.0))


def test_overlapping_ribs_are_rejected():
    with pytest.raises(GeometryError, match="overlap"):
        build_finray(replace(BASE, N=40))


@pytest.mark.parametrize("field,value", [("H", -1.0), ("N", 2.5), ("L_angle", 95.0), ("t_rib", 0.0)])
def test_invalid_parameters(field, value):
    with pytest.raises(GeometryError):
        replace(BASE, **{field: value})


def test_params_json_round_trip():
    p = FinRayParams.from_json(BASE.to_json())
    assert p == BASE
    a, b = build_finray(p), build_finray(BASE)
    np.testing.assert_array_equal(a.outer, b.outer)
    for h1, h2 in zip(a.holes, b.holes):
        np.testing.assert_array_equal(h1, h2)


def test_params_json_rejects_unknown_keys():
    with pytest.raises(GeometryError, match="unknown"):
        FinRayParams.from_json('{"H": 90, "colour": 1}')


def test_domain_dict_round_trip():
    d = build_finray(BASE)
    back = Domain2D.from_dict(d.to_dict())
    np.testing.assert_array_equal(back.outer, d.outer)
    assert back.area == d.area


def test_markers_and_forced_point_are_in_material():
    d = build_finray(BASE)
    m = marker_locations(BASE)
    assert m.shape == (9, 2)
    assert d.contains(m).all()
    # ordered from base to tip
    assert np.all(np.diff(m[:, 1]) > 0)
    f = forced_point(BASE)
    assert np.array_equal(f, [0.0, 35.0])
    assert d.distance_to_boundary(f[None])[0] < 1e-12


# sampling ---------------------------------------------------------------------------

def test_unit_square_collocation():
    pts = sample_collocation(rectangle(0, 0, 1, 1), 1000, seed=1)
    assert pts.shape == (1000, 2)
    assert ((pts > 0) & (pts < 1)).all()
    assert abs(pts[:, 0].mean() - 0.5) < 0.05
    np.testing.assert_array_equal(pts, sample_collocation(rectangle(0, 0, 1, 1), 1000, seed=1))


def test_finray_collocation_all_in_material():
    d = build_finray(BASE)
    pts = sample_collocation(d, 5000, seed=3)
    assert len(pts) == 5000
    assert d.contains(pts).all()
    for hole in d.holes:
        assert not kernels.points_in_polygon(pts, hole).any()


def test_mesh_collocation_uses_every_node():
    mesh = structured_rectangle(0, 0, 1, 90, 10, 8268)
    assert len(sample_collocation(mesh)) == 90959


def test_empty_domain_is_rejected():
    with pytest.raises(GeometryError):
        sample_collocation(Domain2D(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])), 10)


def test_base_boundary_points():
    pts = sample_boundary(build_finray(BASE), "base", 1000)
    assert pts.shape == (1000, 2)
    assert np.all(pts[:, 1] == 0)
    assert pts[:, 0].min() == 0 and pts[:, 0].max() == BASE.L


def test_polyline_spacing():
    seg = np.array([[0.0, 0.0], [10.0, 0.0]])
    np.testing.assert_array_equal(sample_polyline(seg, 3), [[0, 0], [5, 0], [10, 0]])
    np.testing.assert_array_equal(sample_polyline(seg, 2), seg)
    with pytest.raises(ValueError):
        sample_polyline(seg, 1)


def test_unknown_edge():
    with pytest.raises(KeyError, match="unknown edge"):
        sample_boundary(build_finray(BASE), "roof", 10)


# meshes ---------------------------------------------------------------------------

def test_parse_minimal_file():
    m = parse_mesh(UNIT_SQUARE_MSH)
    assert m.nodes.shape == (4, 2) and m.triangles.shape == (2, 3)
    assert m.edge_tags == ["base"]
    assert m.area == pytest.approx(1.0)
    assert (m.signed_areas() > 0).all()


def test_quad_element_is_rejected_with_line():
    text = UNIT_SQUARE_MSH.replace("3 2 2 0 1 1 3 4", "3 3 2 0 1 1 2 3 4")
    with pytest.raises(MeshParseError, match="line 19"):
        parse_mesh(text)


def test_out_of_range_node():
    with pytest.raises(MeshParseError, match="line"):
        parse_mesh(UNIT_SQUARE_MSH.replace("2 2 2 0 1 1 2 3", "2 2 2 0 1 1 2 9"))


def test_nonzero_z_is_rejected():
    with pytest.raises(MeshParseError, match="z"):
        parse_mesh(UNIT_SQUARE_MSH.replace("3 1 1 0", "3 1 1 0.5"))


def test_missing_section():
    with pytest.raises(MeshParseError):
        parse_mesh(UNIT_SQUARE_MSH.split("$Elements")[0])


def test_clockwise_triangles_are_reoriented():
    m = TriangleMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 2, 1]]))
    assert m.signed_areas()[0] == 0.5


def test_finray_mesh_conforms_and_round_trips():
    d = build_finray(BASE)
    mesh = triangulate(d, 1.0)
    assert mesh.area == pytest.approx(d.area, rel=1e-9)
    assert mesh.degenerate_triangles().size == 0
    assert set(mesh.edge_tags) >= {"base", "front", "back", "tip", "hole"}
    back = parse_mesh(write_mesh(mesh))
    np.testing.assert_array_equal(back.nodes, mesh.nodes)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)
    np.testing.assert_array_equal(back.edges, mesh.edges)
    assert back.edge_tags == mesh.edge_tags


def test_mesher_inserts_requested_boundary_points():
    d = build_finray(BASE)
    f = forced_point(BASE)
    mesh = triangulate(d, 1.3, boundary_points=[f])
    assert np.array_equal(mesh.nodes[mesh.nearest_node(f)], f)


@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.integers(1, 6), st.integers(1, 6))
@settings(max_examples=25, deadline=None)
def test_structured_mesh_area_is_exact(w, h, nx, ny):
    m = structured_rectangle(0.0, 0.0, w, h, nx, ny)
    assert m.area == pytest.approx(w * h, rel=1e-12)
    assert len(m.nodes) == (nx + 1) * (ny + 1)
    assert len(m.tagged_nodes("base")) == nx + 1


def test_params_file_fields_match_dataclass():
    assert list(asdict(BASE)) == ["H", "L", "W", "L_angle", "L_tip", "N", "t_rib", "t_flex", "t_back"]
