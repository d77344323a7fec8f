import dataclasses

import numpy as np
import pytest
import scipy.io
from hypothesis import given
from hypothesis import strategies as st

from stagcalc.fields import CellField, EdgeField, VertexField
from stagcalc.mesh import build_quad_mesh
from stagcalc.operators import (KINDS, assemble, curl, div, grad, laplacian_cell,
                                laplacian_vertex, skew_grad)


def _rand(cls, mesh, seed):
    return cls(mesh, np.random.default_rng(seed).standard_normal(cls._size(mesh)))


# -- grad --------------------------------------------------------------------------

def test_grad_of_constant_vanishes(any_mesh):
    assert np.abs(grad(CellField.constant(any_mesh, 3.7)).values).max() <= 1e-12 / any_mesh.h


def test_grad_of_x_on_quad():
    m = build_quad_mesh(6, 6)
    g = grad(CellField.from_function(m, lambda x, y: x)).values
    n = m.edge_normal
    ne = m.n_interior_edges
    xn, yn = np.abs(n[:ne, 0]) == 1, np.abs(n[:ne, 1]) == 1
    assert np.allclose(g[:ne][xn], 1.0, atol=1e-13)
    assert np.allclose(g[:ne][yn], 0.0, atol=1e-13)


def test_grad_two_cell_toy():
    m = build_quad_mesh(2, 2)
    e = 0
    tail, head = m.edge_cells[e]
    assert tuple(m.edge_cell_sign[e]) == (1, -1) and m.edge_de[e] == 0.5
    phi = np.zeros(m.n_cells)
    phi[head] = 3.0
    assert grad(CellField(m, phi)).values[e] == pytest.approx(6.0, rel=1e-15)


# -- skew_grad ----------------------------------------------------------------------

def test_skew_grad_constant(any_mesh):
    c = 2.5
    s = skew_grad(VertexField.constant(any_mesh, c)).values
    ne = any_mesh.n_interior_edges
    assert np.abs(s[:ne]).max() <= 1e-12 / any_mesh.h
    t = any_mesh.edge_vertex_sign[ne:, 0]
    assert np.allclose(s[ne:], c * t / any_mesh.edge_le[ne:], rtol=1e-14)


def test_skew_grad_zero(any_mesh):
    assert not skew_grad(VertexField.zeros(any_mesh)).values.any()


def test_skew_grad_two_vertex_toy():
    m = build_quad_mesh(2, 2)
    e = 0
    le = m.edge_le.copy()
    le[e] = 2.0
    m = dataclasses.replace(m, edge_le=le)
    psi = np.zeros(m.n_vertices)
    for v, t in zip(m.edge_vertices[e], m.edge_vertex_sign[e]):
        psi[v] = 1.0 if t == 1 else 4.0
    assert skew_grad(VertexField(m, psi)).values[e] == pytest.approx(-1.5, rel=1e-15)


# -- div -------------------------------------------------------------------------------

def test_div_zero(any_mesh):
    assert not div(EdgeField.zeros(any_mesh)).values.any()


def test_div_of_skew_grad_vanishes(any_mesh):
    for seed in range(5):
        psi = _rand(VertexField, any_mesh, seed)
        d = div(skew_grad(psi)).values
        assert np.abs(d).max() <= 1e-13 * np.abs(psi.values).max() / any_mesh.h**2


def test_div_single_square():
    m = build_quad_mesh(2, 2, (0.0, 2.0, 0.0, 2.0))
    i = 0
    assert m.cell_areas[i] == 1.0
    edges = m.EC[i]
    assert len(edges) == 4 and np.all(m.edge_le[edges] == 1.0)
    u = np.zeros(m.n_edges)
    for val, e in zip((1.0, 2.0, 3.0, 4.0), edges):
        k = list(m.edge_cells[e]).index(i)
        u[e] = val * m.edge_cell_sign[e, k]  # outward component = val
    assert div(EdgeField(m, u)).values[i] == pytest.approx(10.0, rel=1e-15)


# -- curl ---------------------------------------------------------------------------------

def test_curl_zero(any_mesh):
    assert not curl(EdgeField.zeros(any_mesh)).values.any()


def test_curl_of_grad_vanishes(any_mesh):
    for seed in range(5):
        phi = _rand(CellField, any_mesh, seed)
        c = curl(grad(phi)).values
        assert np.abs(c).max() <= 1e-13 * np.abs(phi.values).max() / any_mesh.h**2


def test_curl_single_dual_cell():
    m = build_quad_mesh(2, 2, (0.0, 2.0, 0.0, 2.0))
    nu = 0
    areas = m.vertex_areas.copy()
    areas[nu] = 0.5
    m = dataclasses.replace(m, vertex_areas=areas)
    edges = m.EV[nu]
    assert np.all(m.edge_de[edges] == 1.0)
    u = np.zeros(m.n_edges)
    for e in edges[:3]:
        k = list(m.edge_vertices[e]).index(nu)
        u[e] = m.edge_vertex_sign[e, k]  # t-aligned, as seen from nu
    assert curl(EdgeField(m, u)).values[nu] == pytest.approx(-6.0, rel=1e-15)


# -- integration by parts -----------------------------------------------------------------

@given(st.integers(0, 2**32 - 1))
def test_integration_by_parts_grad_div(seed):
    from stagcalc.mesh import build_tri_hex_mesh
    for m in (build_quad_mesh(5, 7), build_tri_hex_mesh(1)):
        u, phi = _rand(EdgeField, m, seed), _rand(CellField, m, seed + 1)
        lhs, rhs = u.inner(grad(phi)), -0.5 * div(u).inner(phi)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), u.norm() * grad(phi).norm())


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_integration_by_parts_skew_curl(seed, wall_zero):
    m = build_quad_mesh(6, 4)
    u, psi = _rand(EdgeField, m, seed), _rand(VertexField, m, seed + 1)
    if wall_zero:
        vals = u.values.copy()
        vals[m.boundary_edges] = 0.0
        u = EdgeField(m, vals)
    s = skew_grad(psi)
    lhs, rhs = u.inner(s), -0.5 * curl(u).inner(psi)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), u.norm() * s.norm())


def test_ibp_matrix_form(any_mesh):
    # W_e G = -1/2 D^T W_c  and  W_e S = -1/2 C^T W_v
    m = any_mesh
    G, D = assemble(m, "grad").matrix, assemble(m, "div").matrix
    S, C = assemble(m, "skew_grad").matrix, assemble(m, "curl").matrix
    We, Wc, Wv = (np.asarray(w)[:, None] for w in
                  (m.edge_diamond_area, m.cell_areas, m.vertex_areas))
    lhs = G.multiply(We).toarray()
    rhs = -0.5 * D.multiply(Wc).T.toarray()
    assert np.abs(lhs - rhs).max() <= 1e-14 * np.abs(lhs).max()
    lhs = S.multiply(We).toarray()
    rhs = -0.5 * C.multiply(Wv).T.toarray()
    assert np.abs(lhs - rhs).max() <= 1e-14 * np.abs(lhs).max()


# -- laplacians ----------------------------------------------------------------------------

def test_laplacian_cell_constant(any_mesh):
    lap = laplacian_cell(CellField.constant(any_mesh, 1.0)).values
    assert np.abs(lap[:any_mesh.n_interior_cells]).max() <= 1e-10 / any_mesh.h**2


@pytest.mark.parametrize("lap,cls", [(laplacian_cell, CellField), (laplacian_vertex, VertexField)])
def test_laplacians_symmetric(any_mesh, lap, cls):
    for seed in range(10):
        a, b = _rand(cls, any_mesh, seed), _rand(cls, any_mesh, seed + 100)
        x, y = lap(a).inner(b), a.inner(lap(b))
        assert abs(x - y) <= 1e-12 * max(abs(x), abs(y))
        assert lap(a).inner(a) <= 1e-12 * abs(x)  # negative semidefinite


def test_laplacian_cell_of_x_squared():
    m = build_quad_mesh(16, 16)
    lap = laplacian_cell(CellField.from_function(m, lambda x, y: x**2)).values
    assert np.allclose(lap[:m.n_interior_cells], 2.0, atol=1e-9)


def test_laplacian_vertex_zero(any_mesh):
    assert not laplacian_vertex(VertexField.zeros(any_mesh)).values.any()


def _lap_vertex_error(n):
    m = build_quad_mesh(n, n)
    f = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)  # noqa: E731
    # sampled everywhere; the wall value enters through the implicit exterior zero
    lap = laplacian_vertex(VertexField.from_function(m, f)).values
    inner = ~m.boundary_vertex_mask
    vc = m.vertex_centers[inner]
    err = lap[inner] + 2 * np.pi**2 * f(vc[:, 0], vc[:, 1])
    return m.h, np.sqrt(m.vertex_areas[inner] @ err**2)


def test_laplacian_vertex_converges():
    (h1, e1), (h2, e2), (h3, e3) = (_lap_vertex_error(n) for n in (8, 16, 32))
    assert e3 < e2 < e1
    assert np.log(e2 / e3) / np.log(h2 / h3) >= 1.0


def test_grad_consistency_order():
    f = lambda x, y: np.cos(2 * x) * np.exp(y)  # noqa: E731

    def err(n):
        m = build_quad_mesh(n, n)
        g = grad(CellField.from_function(m, f))
        exact = EdgeField.from_function(
            m, lambda x, y: (-2 * np.sin(2 * x) * np.exp(y), np.cos(2 * x) * np.exp(y)))
        return m.h, (g - exact).norm()
    (h1, e1), (h2, e2) = err(16), err(32)
    assert e2 < e1 and np.log(e1 / e2) / np.log(h1 / h2) >= 1.0


# -- assembly ------------------------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_assembled_matches_matrix_free(any_mesh, kind):
    op = assemble(any_mesh, kind)
    fn = {"grad": grad, "skew_grad": skew_grad, "div": div, "curl": curl,
          "laplacian_cell": laplacian_cell, "laplacian_vertex": laplacian_vertex}[kind]
    cls = {"cell": CellField, "vertex": VertexField, "edge": EdgeField}[op.col_space]
    x = _rand(cls, any_mesh, 1)
    a, b = op.apply(x).values, fn(x).values
    assert np.abs(a - b).max() <= 1e-14 * max(1.0, np.abs(b).max())
    assert op.matrix.nnz == op.matrix.count_nonzero()


def test_assemble_shapes_and_cache(quad8):
    assert assemble(quad8, "div").shape == (quad8.n_cells, quad8.n_edges)
    assert assemble(quad8, "grad").shape == (quad8.n_edges, quad8.n_cells)
    assert assemble(quad8, "grad") is assemble(quad8, "grad")
    with pytest.raises(ValueError):
        assemble(quad8, "hessian")


def test_apply_rejects_wrong_space(quad8):
    with pytest.raises(TypeError):
        assemble(quad8, "grad").apply(VertexField.zeros(quad8))


def test_matrix_market_export(tmp_path, quad8):
    op = assemble(quad8, "curl")
    f = tmp_path / "curl.mtx"
    op.write_matrix_market(f)
    back = scipy.io.mmread(f).tocsr()
    assert back.shape == op.shape
    assert np.abs((back - op.matrix).toarray()).max() <= 1e-15 * np.abs(op.matrix).max()
