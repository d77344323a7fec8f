import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stagcalc.fields import (CellField, EdgeField, MeshMismatchError, VertexField,
                             inner_cell, inner_edge, inner_vertex, norm_l2_cell,
                             norm_l2_edge, norm_l2_vertex, semi_h1_edge)
from stagcalc.mesh import build_quad_mesh
from stagcalc.operators import curl, div, grad

UNIT4 = build_quad_mesh(4, 4)
FIELD_TYPES = (CellField, VertexField, EdgeField)
finite = st.floats(-1e3, 1e3, allow_nan=False)


def random_field(cls, mesh, rng):
    return cls(mesh, rng.standard_normal(cls._size(mesh)))


# -- norms -------------------------------------------------------------------

@pytest.mark.parametrize("cls", FIELD_TYPES)
def test_zero_norm(cls):
    assert cls.zeros(UNIT4).norm() == 0.0


def test_unit_constant_cell_norm_is_one():
    assert norm_l2_cell(CellField.constant(UNIT4, 1.0)) == pytest.approx(1.0, rel=1e-14)


def test_unit_constant_vertex_norm_is_one():
    assert norm_l2_vertex(VertexField.constant(UNIT4, 1.0)) == pytest.approx(1.0, rel=1e-14)


def test_single_cell_indicator():
    m = build_quad_mesh(2, 2, (0.0, 1.0, 0.0, 1.0))
    # the one interior cell of the 2x2 layout has area 1/4
    vals = np.zeros(m.n_cells)
    vals[0] = 1.0
    assert m.cell_areas[0] == 0.25
    assert norm_l2_cell(CellField(m, vals)) == 0.5


def test_single_dual_cell():
    m = build_quad_mesh(4, 4)
    vals = np.zeros(m.n_vertices)
    vals[5] = 4.0
    assert m.vertex_areas[5] == 0.0625
    assert norm_l2_vertex(VertexField(m, vals)) == 1.0


def test_edge_norm_all_ones():
    u = EdgeField.constant(UNIT4, 1.0)
    assert norm_l2_edge(u) == pytest.approx(np.sqrt(UNIT4.edge_diamond_area.sum()), rel=1e-15)


def test_quad2_interior_edge():
    m = build_quad_mesh(2, 2)
    e = 0
    assert e < m.n_interior_edges and m.edge_diamond_area[e] == 1 / 8
    vals = np.zeros(m.n_edges)
    vals[e] = 2.0
    assert norm_l2_edge(EdgeField(m, vals)) == pytest.approx(np.sqrt(0.5), rel=1e-15)


# -- inner products --------------------------------------------------------------

@pytest.mark.parametrize("cls,inner", [(CellField, inner_cell), (VertexField, inner_vertex),
                                       (EdgeField, inner_edge)])
def test_inner_product_laws(cls, inner):
    rng = np.random.default_rng(3)
    z = cls.zeros(UNIT4)
    for _ in range(100):
        x, y = random_field(cls, UNIT4, rng), random_field(cls, UNIT4, rng)
        assert inner(x, z) == 0.0
        assert inner(x, x) == pytest.approx(x.norm() ** 2, rel=1e-15)
        assert inner(x, y) == pytest.approx(inner(y, x), rel=1e-15)
        assert abs(inner(x, y)) <= x.norm() * y.norm() * (1 + 1e-15)


def test_mesh_mismatch_rejected():
    other = build_quad_mesh(4, 4)
    with pytest.raises(MeshMismatchError):
        inner_cell(CellField.zeros(UNIT4), CellField.zeros(other))
    with pytest.raises(MeshMismatchError):
        CellField.zeros(UNIT4) + CellField.zeros(other)


def test_kind_mismatch_rejected():
    with pytest.raises(TypeError):
        CellField.zeros(UNIT4).inner(VertexField.zeros(UNIT4))


def test_invariants_enforced():
    with pytest.raises(ValueError):
        CellField(UNIT4, np.zeros(3))
    vals = np.zeros(UNIT4.n_cells)
    vals[0] = np.nan
    with pytest.raises(ValueError):
        CellField(UNIT4, vals)
    f = CellField.zeros(UNIT4)
    with pytest.raises(ValueError):
        f.values[0] = 1.0


# -- norm properties ----------------------------------------------------------------

@pytest.mark.parametrize("cls", FIELD_TYPES)
@given(data=st.data(), c=finite)
def test_norm_homogeneous_and_triangle(cls, data, c):
    n = cls._size(UNIT4)
    a = cls(UNIT4, data.draw(arrays(float, n, elements=finite)))
    b = cls(UNIT4, data.draw(arrays(float, n, elements=finite)))
    assert (c * a).norm() == pytest.approx(abs(c) * a.norm(), rel=1e-12, abs=1e-12)
    assert (a + b).norm() <= a.norm() + b.norm() + 1e-12 * (1 + a.norm() + b.norm())


@pytest.mark.parametrize("cls", FIELD_TYPES)
@given(data=st.data())
def test_norm_monotone_under_domination(cls, data):
    n = cls._size(UNIT4)
    a = data.draw(arrays(float, n, elements=finite))
    slack = data.draw(arrays(float, n, elements=st.floats(0, 10)))
    big = np.abs(a) + slack
    assert cls(UNIT4, a).norm() <= cls(UNIT4, big).norm() * (1 + 1e-15)


# -- semi-norm -----------------------------------------------------------------------

def test_semi_h1_zero():
    assert semi_h1_edge(EdgeField.zeros(UNIT4)) == 0.0


def test_semi_h1_of_gradient_is_div_norm():
    rng = np.random.default_rng(0)
    phi = CellField(UNIT4, rng.standard_normal(UNIT4.n_cells))
    u = grad(phi)
    assert np.abs(curl(u).values).max() <= 1e-13 * np.abs(u.values).max() / UNIT4.h
    assert semi_h1_edge(u) == pytest.approx(div(u).norm(), rel=1e-13)


def test_semi_h1_constant_vector_on_quad_interior():
    m = build_quad_mesh(8, 8)
    u = EdgeField.from_function(m, lambda x, y: (np.ones_like(x), np.zeros_like(x)))
    ni = m.n_interior_cells
    inner = ~m.boundary_vertex_mask
    assert np.abs(div(u).values[:ni]).max() <= 1e-12
    assert np.abs(curl(u).values[inner]).max() <= 1e-12


@given(st.integers(0, 2**16))
def test_semi_h1_zero_iff_div_and_curl_zero(seed):
    rng = np.random.default_rng(seed)
    u = EdgeField(UNIT4, rng.standard_normal(UNIT4.n_edges))
    s = semi_h1_edge(u)
    assert (s == 0) == (not np.any(div(u).values) and not np.any(curl(u).values))
    assert s == pytest.approx(np.hypot(div(u).norm(), curl(u).norm()), rel=1e-15)


# -- csv ------------------------------------------------------------------------------

def test_csv_export(tmp_path):
    f = tmp_path / "phi.csv"
    CellField.constant(UNIT4, 0.1).to_csv(f, mesh_file="quad.stagmesh")
    lines = f.read_text().splitlines()
    assert lines[0] == "# mesh quad.stagmesh"
    assert lines[1] == "kind,index,value"
    assert lines[2] == "cell,0,0.10000000000000001"
    assert len(lines) == 2 + UNIT4.n_cells
