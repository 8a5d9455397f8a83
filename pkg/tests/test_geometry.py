import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tetralfa import (
    GeometryError,
    LatticeBasis,
    TetGeometry,
    basis_from_tet,
    catalog_names,
    load_geometry,
    shape_catalog,
    tet_metrics,
)

# Edge ratio, min angle, max angle per shape (the published shape table).
PUBLISHED_METRICS = {
    "regular": (1.0, 60.0, 60.0),
    "optimized": (1.15, 54.9, 70.2),
    "needle": (10.0, 5.7, 87.1),
    "wedge": (4.0, 14.3, 82.8),
    "spindle": (10.0, 5.7, 87.1),
    "spade": (1.67, 33.6, 112.9),
    "sliver": (1.4, 45.6, 88.9),
    "cap": (1.71, 31.4, 117.2),
}


def test_catalog_lists_all_shapes():
    assert set(catalog_names()) == set(PUBLISHED_METRICS)


@pytest.mark.parametrize("name", sorted(PUBLISHED_METRICS))
def test_catalog_metrics_match_published_within_two_percent(name):
    m = tet_metrics(shape_catalog(name))
    ratio, amin, amax = PUBLISHED_METRICS[name]
    assert m["edge_ratio"] == pytest.approx(ratio, rel=0.02)
    assert m["min_angle"] == pytest.approx(amin, rel=0.02)
    assert m["max_angle"] == pytest.approx(amax, rel=0.02)


@pytest.mark.parametrize("name", sorted(PUBLISHED_METRICS))
def test_basis_invariants(name):
    b = basis_from_tet(shape_catalog(name))
    assert np.allclose(np.linalg.norm(b.e, axis=1), 1.0, atol=1e-12)
    assert np.allclose(b.e @ b.ep.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(b.e) > 0


def test_regular_basis_inner_products():
    b = basis_from_tet(shape_catalog("regular"))
    assert np.allclose(b.h, 1.0)
    G = b.e @ b.e.T
    assert G[0, 1] == pytest.approx(-0.5)
    assert G[1, 2] == pytest.approx(-0.5)
    assert G[0, 2] == pytest.approx(0.0, abs=1e-12)


def test_path_corner_tet_gives_orthonormal_self_reciprocal_basis():
    geom = TetGeometry([[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]])
    b = basis_from_tet(geom)
    assert np.allclose(b.e, np.eye(3))
    assert np.allclose(b.ep, b.e)
    assert np.allclose(b.h, 1.0)


def test_basis_reproduces_coarse_vertices():
    geom = shape_catalog("optimized")
    b = basis_from_tet(geom)
    v = geom.vertices
    assert np.linalg.norm(v[2] - v[0]) == pytest.approx(1.15)
    assert np.linalg.norm(v[3] - v[1]) == pytest.approx(1.15)
    corners = np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)])
    assert np.allclose(v[0] + b.point(corners), v)


def test_negative_orientation_is_reflected():
    geom = shape_catalog("wedge")
    mirrored = TetGeometry(geom.vertices * np.array([1.0, -1.0, 1.0]))
    b1, b2 = basis_from_tet(geom), basis_from_tet(mirrored)
    assert np.linalg.det(b2.e) > 0
    assert np.allclose(b1.gram(), b2.gram())


@given(st.floats(0.01, 100.0))
@settings(max_examples=25, deadline=None)
def test_scaling_keeps_directions_and_scales_spacings(c):
    geom = shape_catalog("spade")
    b, bc = basis_from_tet(geom), basis_from_tet(geom.scaled(c))
    assert np.allclose(bc.e, b.e, atol=1e-12)
    assert np.allclose(bc.h, c * b.h, rtol=1e-12)


def test_degenerate_tet_rejected():
    flat = TetGeometry([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
    with pytest.raises(GeometryError, match="degenerate"):
        basis_from_tet(flat)


def test_nearly_flat_catalog_shapes_pass():
    for name in ("sliver", "cap"):
        assert not shape_catalog(name).is_degenerate()


def test_bad_inputs():
    with pytest.raises(GeometryError):
        TetGeometry(np.zeros((3, 3)))
    with pytest.raises(GeometryError, match="unknown shape"):
        shape_catalog("octahedron")
    with pytest.raises(GeometryError):
        LatticeBasis.from_vectors([[1, 0, 0], [0, 1, 0], [1, 1, 0]])


def test_load_geometry_from_files(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"vertices": [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]]}))
    assert np.allclose(load_geometry(str(p)).e, np.eye(3))
    q = tmp_path / "b.json"
    q.write_text(json.dumps({"label": "x", "basis": {"e1": [2, 0, 0], "e2": [0, 1, 0],
                                                     "e3": [0, 0, 1], "h": [1, 2, 3]}}))
    b = load_geometry(str(q))
    assert np.allclose(b.h, [1, 2, 3]) and b.label == "x"
    assert np.allclose(load_geometry("catalog:regular").h, 1.0)
    with pytest.raises(GeometryError):
        load_geometry(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    with pytest.raises(GeometryError):
        load_geometry(str(bad))
