"""First-order staggered operators and their compositions.

Conventions (0-based):

* ``grad``       cells -> edges,   [grad phi]_e = -(1/d_e) sum_i phi_i n_{e,i}
* ``skew_grad``  vertices -> edges, (1/l_e) sum_nu psi_nu t_{e,nu}
* ``div``        edges -> cells,   (1/A_i) sum_e u_e l_e n_{e,i}
* ``curl``       edges -> vertices, -(1/A_nu) sum_e u_e d_e t_{e,nu}

On a boundary edge only one dual cell is present, so ``skew_grad`` acts as
if psi were zero outside the domain.  ``div`` on a clipped boundary cell
sums over its in-domain edges only, i.e. there is no flux through the wall.
``grad`` always has both cells, since a boundary edge runs between two
boundary cell centers along the wall.
"""
from __future__ import annotations

from dataclasses import dataclass
import weakref

import numpy as np
import scipy.io
import scipy.sparse as sp

from .fields import CellField, EdgeField, VertexField, _Field
from .mesh import StaggeredMesh

KINDS = ("grad", "skew_grad", "div", "curl", "laplacian_cell", "laplacian_vertex")

_SPACES = {
    "grad": ("edge", "cell"),
    "skew_grad": ("edge", "vertex"),
    "div": ("cell", "edge"),
    "curl": ("vertex", "edge"),
    "laplacian_cell": ("cell", "cell"),
    "laplacian_vertex": ("vertex", "vertex"),
}
_FIELD_TYPES = {"cell": CellField, "vertex": VertexField, "edge": EdgeField}


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    matrix: sp.csr_matrix
    row_space: str
    col_space: str
    mesh_token: int

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, field: _Field) -> _Field:
        if field.kind != self.col_space:
            raise TypeError(f"operator acts on {self.col_space} fields, got {field.kind}")
        if field.mesh.token != self.mesh_token:
            raise ValueError("field belongs to a different mesh")
        return _FIELD_TYPES[self.row_space](field.mesh, self.matrix @ field.values)

    def write_matrix_market(self, path) -> None:
        scipy.io.mmwrite(path, self.matrix.tocoo(),
                         comment=f"{self.row_space} <- {self.col_space}")


# -- matrix-free kernels on raw coefficient arrays --------------------------

def _grad(mesh: StaggeredMesh, phi: np.ndarray) -> np.ndarray:
    ec, cs = mesh.edge_cells, mesh.edge_cell_sign
    return -(phi[ec] * cs).sum(axis=1) / mesh.edge_de


def _skew_grad(mesh: StaggeredMesh, psi: np.ndarray) -> np.ndarray:
    ev, vs = mesh.edge_vertices, mesh.edge_vertex_sign
    vals = np.where(ev >= 0, psi[np.maximum(ev, 0)], 0.0)
    return (vals * vs).sum(axis=1) / mesh.edge_le


def _div(mesh: StaggeredMesh, u: np.ndarray) -> np.ndarray:
    flux = (u * mesh.edge_le)[:, None] * mesh.edge_cell_sign
    out = np.zeros(mesh.n_cells)
    np.add.at(out, mesh.edge_cells.ravel(), flux.ravel())
    return out / mesh.cell_areas


def _curl(mesh: StaggeredMesh, u: np.ndarray) -> np.ndarray:
    circ = (u * mesh.edge_de)[:, None] * mesh.edge_vertex_sign
    ev = mesh.edge_vertices.ravel()
    keep = ev >= 0
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, ev[keep], circ.ravel()[keep])
    return -out / mesh.vertex_areas


# -- public field-level API ---------------------------------------------------

def _need(field, cls):
    if not isinstance(field, cls):
        raise TypeError(f"expected {cls.__name__}, got {type(field).__name__}")


def grad(phi: CellField) -> EdgeField:
    _need(phi, CellField)
    return EdgeField(phi.mesh, _grad(phi.mesh, phi.values))


def skew_grad(psi: VertexField) -> EdgeField:
    _need(psi, VertexField)
    return EdgeField(psi.mesh, _skew_grad(psi.mesh, psi.values))


def div(u: EdgeField) -> CellField:
    _need(u, EdgeField)
    return CellField(u.mesh, _div(u.mesh, u.values))


def curl(u: EdgeField) -> VertexField:
    _need(u, EdgeField)
    return VertexField(u.mesh, _curl(u.mesh, u.values))


def laplacian_cell(phi: CellField) -> CellField:
    return div(grad(phi))


def laplacian_vertex(psi: VertexField) -> VertexField:
    """curl of skew_grad; a Dirichlet-type Laplacian through the zero exterior."""
    return curl(skew_grad(psi))


# -- assembly -------------------------------------------------------------------

_cache: "weakref.WeakKeyDictionary[StaggeredMesh, dict]" = weakref.WeakKeyDictionary()


def _build(mesh: StaggeredMesh, kind: str) -> sp.csr_matrix:
    E, Nc, Nv = mesh.n_edges, mesh.n_cells, mesh.n_vertices
    rows2 = np.repeat(np.arange(E), 2)
    if kind == "grad":
        vals = -(mesh.edge_cell_sign / mesh.edge_de[:, None]).ravel()
        m = sp.coo_matrix((vals, (rows2, mesh.edge_cells.ravel())), shape=(E, Nc))
    elif kind == "skew_grad":
        ev = mesh.edge_vertices.ravel()
        keep = ev >= 0
        vals = (mesh.edge_vertex_sign / mesh.edge_le[:, None]).ravel()
        m = sp.coo_matrix((vals[keep], (rows2[keep], ev[keep])), shape=(E, Nv))
    elif kind == "div":
        ec = mesh.edge_cells.ravel()
        vals = (mesh.edge_cell_sign * mesh.edge_le[:, None]).ravel() / mesh.cell_areas[ec]
        m = sp.coo_matrix((vals, (ec, rows2)), shape=(Nc, E))
    elif kind == "curl":
        ev = mesh.edge_vertices.ravel()
        keep = ev >= 0
        vals = -(mesh.edge_vertex_sign * mesh.edge_de[:, None]).ravel()
        vals = vals[keep] / mesh.vertex_areas[ev[keep]]
        m = sp.coo_matrix((vals, (ev[keep], rows2[keep])), shape=(Nv, E))
    elif kind == "laplacian_cell":
        m = assemble(mesh, "div").matrix @ assemble(mesh, "grad").matrix
    elif kind == "laplacian_vertex":
        m = assemble(mesh, "curl").matrix @ assemble(mesh, "skew_grad").matrix
    else:
        raise ValueError(f"unknown operator {kind!r}; choose from {KINDS}")
    m = sp.csr_matrix(m)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


def assemble(mesh: StaggeredMesh, kind: str) -> OperatorMatrix:
    """Sparse matrix of an operator, cached per mesh."""
    per_mesh = _cache.setdefault(mesh, {})
    if kind not in per_mesh:
        rows, cols = _SPACES.get(kind, (None, None))
        if rows is None:
            raise ValueError(f"unknown operator {kind!r}; choose from {KINDS}")
        per_mesh[kind] = OperatorMatrix(_build(mesh, kind), rows, cols, mesh.token)
    return per_mesh[kind]
