"""Discrete Helmholtz machinery.

Every edge field splits orthogonally as ``skew_grad(psi) + grad(phi)``
with ``phi`` of zero mean.  The two potentials solve decoupled elliptic
problems, which is also how a field is rebuilt from its curl and div.
The path integrators recover a potential from a curl-free (or a stream
function from a divergence-free) field by walking a spanning tree and
checking every remaining edge.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from .fields import CellField, EdgeField, VertexField
from .linalg import SparseSystem, solve_cg
from .mesh import StaggeredMesh
from .operators import assemble, curl, div, grad, skew_grad


class IntegrationError(ValueError):
    """A closing edge of the spanning tree does not match the field."""

    def __init__(self, msg, edge, cycle, residual):
        super().__init__(msg)
        self.edge = edge
        self.cycle = cycle
        self.residual = residual


class CompatibilityError(ValueError):
    pass


# -- elliptic solves ------------------------------------------------------------

def _vertex_stiffness(mesh):
    # -A_nu * (curl skew_grad) = 2 S^T W_e S, symmetric positive definite
    S = assemble(mesh, "skew_grad").matrix
    return 2.0 * (S.T @ sp.diags(mesh.edge_diamond_area) @ S).tocsr()


def _cell_stiffness(mesh):
    G = assemble(mesh, "grad").matrix
    return 2.0 * (G.T @ sp.diags(mesh.edge_diamond_area) @ G).tocsr()


def solve_vertex_poisson(omega: VertexField, tol: float = 1e-12) -> VertexField:
    """psi with ``laplacian_vertex(psi) = omega``."""
    mesh = omega.mesh
    rhs = -mesh.vertex_areas * omega.values
    x, _ = solve_cg(SparseSystem(_vertex_stiffness(mesh), rhs, tol=tol))
    return VertexField(mesh, x)


def solve_cell_poisson(delta: CellField, tol: float = 1e-12) -> CellField:
    """Zero-mean phi with ``laplacian_cell(phi) = delta``."""
    mesh = delta.mesh
    rhs = -mesh.cell_areas * delta.values
    x, _ = solve_cg(SparseSystem(_cell_stiffness(mesh), rhs,
                                 constraint=mesh.cell_areas, tol=tol))
    return CellField(mesh, x)


def helmholtz_decompose(u: EdgeField, tol: float = 1e-12) -> tuple[VertexField, CellField]:
    """Return ``(psi, phi)`` with ``u = skew_grad(psi) + grad(phi)``."""
    return solve_vertex_poisson(curl(u), tol), solve_cell_poisson(div(u), tol)


def reconstruct_from_curl_div(omega: VertexField, delta: CellField,
                              tol: float = 1e-12) -> EdgeField:
    """The unique edge field with the given curl and divergence."""
    if omega.mesh.token != delta.mesh.token:
        raise ValueError("omega and delta live on different meshes")
    mesh = delta.mesh
    integral = float(mesh.cell_areas @ delta.values)
    scale = max(1.0, float(mesh.cell_areas @ np.abs(delta.values)))
    if abs(integral) > 1e-12 * scale:
        raise CompatibilityError(f"divergence must integrate to zero, got {integral:.6g}")
    psi = solve_vertex_poisson(omega, tol)
    phi = solve_cell_poisson(delta, tol)
    return skew_grad(psi) + grad(phi)


# -- path integration -----------------------------------------------------------

def _spanning_walk(n_nodes, ends, edges, anchor):
    """BFS tree over ``edges``; returns visit order, parent node, parent edge."""
    a, b = ends[edges, 0], ends[edges, 1]
    data = np.concatenate([edges, edges]) + 1
    adj = sp.csr_matrix((data, (np.concatenate([a, b]), np.concatenate([b, a]))),
                        shape=(n_nodes, n_nodes))
    order, pred = breadth_first_order(adj, anchor, directed=True,
                                      return_predecessors=True)
    via = np.full(n_nodes, -1)
    for k in order[1:]:
        via[k] = adj[pred[k], k] - 1
    return order, pred, via


def _tree_cycle(pred, a, b):
    def up(k):
        path = [k]
        while pred[path[-1]] >= 0:
            path.append(int(pred[path[-1]]))
        return path
    pa, pb = up(int(a)), up(int(b))
    common = set(pa) & set(pb)
    ia = next(k for k, v in enumerate(pa) if v in common)
    ib = pb.index(pa[ia])
    return pa[:ia + 1] + pb[:ib][::-1]


def _check_closure(u, mismatch, length, edges, ends, pred, what, tol):
    # compare per unit length, report the raw flux / circulation
    scale = tol * (1.0 + u.norm())
    rel = np.abs(mismatch[edges]) / length[edges]
    if rel.size and rel.max() > scale:
        k = int(np.argmax(rel))
        e = int(edges[k])
        cycle = _tree_cycle(pred, *ends[e])
        raise IntegrationError(
            f"{what} not path independent: closing edge {e} misses by "
            f"{mismatch[e]:.6g} around the cycle {cycle}", e, cycle, float(mismatch[e]))


def integrate_stream(u: EdgeField, anchor: int = 0, edges=None,
                     tol: float = 1e-11) -> VertexField:
    """Stream function with ``skew_grad(psi) = u`` on interior edges.

    ``psi[anchor]`` is set to zero.  A closing edge may miss by at most
    ``tol * (1 + |u|)``.  Raises :class:`IntegrationError` when
    ``u`` is not discretely divergence free.  ``IntegrationError.residual``
    is the net flux ``sum u_e l_e n_{e,i}`` enclosed by the reported cycle.
    """
    mesh = u.mesh
    if edges is None:
        edges = mesh.interior_edges
    edges = np.asarray(edges)
    ev, vs = mesh.edge_vertices, mesh.edge_vertex_sign
    flux = u.values * mesh.edge_le
    order, pred, via = _spanning_walk(mesh.n_vertices, ev, edges, anchor)
    if len(order) < mesh.n_vertices:
        raise IntegrationError("dual graph is disconnected", -1, [], np.nan)
    psi = np.zeros(mesh.n_vertices)
    for k in order[1:]:
        e = via[k]
        j = 0 if ev[e, 0] == k else 1
        other = ev[e, 1 - j]
        psi[k] = (flux[e] - psi[other] * vs[e, 1 - j]) / vs[e, j]
    mismatch = np.zeros(mesh.n_edges)
    mismatch[edges] = (psi[ev[edges]] * vs[edges]).sum(axis=1) - flux[edges]
    _check_closure(u, mismatch, mesh.edge_le, edges, ev, pred, "stream function", tol)
    return VertexField(mesh, psi)


def integrate_potential(u: EdgeField, anchor: int = 0, edges=None,
                        shift_mean: bool = True, tol: float = 1e-11) -> CellField:
    """Potential with ``grad(phi) = u`` on ``edges`` (default: all edges).

    ``IntegrationError.residual`` is the circulation ``sum u_e d_e`` around
    the reported cycle.  Cells not reached through ``edges`` are attached through the remaining
    edges without a closure check.  The result has zero area-weighted mean
    unless ``shift_mean`` is false, in which case ``phi[anchor] = 0``.
    """
    mesh = u.mesh
    all_edges = np.arange(mesh.n_edges)
    edges = all_edges if edges is None else np.asarray(edges)
    ec, cs = mesh.edge_cells, mesh.edge_cell_sign
    drop = u.values * mesh.edge_de  # phi_head - phi_tail

    order, pred, via = _spanning_walk(mesh.n_cells, ec, edges, anchor)
    reached = np.zeros(mesh.n_cells, dtype=bool)
    reached[order] = True
    phi = np.zeros(mesh.n_cells)

    def assign(k, e):
        j = 0 if ec[e, 0] == k else 1
        other = ec[e, 1 - j]
        # drop_e = -(phi_k n_k + phi_other n_other)
        phi[k] = (-drop[e] - phi[other] * cs[e, 1 - j]) / cs[e, j]

    for k in order[1:]:
        assign(k, via[k])
    mismatch = np.zeros(mesh.n_edges)
    mismatch[edges] = -(phi[ec[edges]] * cs[edges]).sum(axis=1) - drop[edges]
    _check_closure(u, mismatch, mesh.edge_de, edges, ec, pred, "potential", tol)

    while not reached.all():
        grew = False
        for e in all_edges:
            r0, r1 = reached[ec[e]]
            if r0 != r1:
                k = ec[e, 1] if r0 else ec[e, 0]
                assign(k, e)
                reached[k] = grew = True
        if not grew:
            raise IntegrationError("primary graph is disconnected", -1, [], np.nan)

    if shift_mean:
        phi -= mesh.cell_areas @ phi / mesh.cell_areas.sum()
    return CellField(mesh, phi)


# -- Poincare constants ---------------------------------------------------------

class PoincareError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


def poincare_constant(space_kind: str, mesh: StaggeredMesh, rtol: float = 1e-6,
                      max_iter: int = 500, seed: int = 0) -> float:
    """Largest ratio ``|x|_0 / |x|_1`` by inverse power iteration.

    ``cell`` uses zero-mean fields with ``|phi|_1 = |grad phi|``, ``vertex``
    uses ``|psi|_1 = |skew_grad psi|`` and ``edge`` uses the div/curl
    seminorm.
    """
    if space_kind == "cell":
        K, W = _cell_stiffness(mesh) / 2.0, mesh.cell_areas
        constraint = W
    elif space_kind == "vertex":
        K, W = _vertex_stiffness(mesh) / 2.0, mesh.vertex_areas
        constraint = None
    elif space_kind == "edge":
        D = assemble(mesh, "div").matrix
        C = assemble(mesh, "curl").matrix
        K = (D.T @ sp.diags(mesh.cell_areas) @ D
             + C.T @ sp.diags(mesh.vertex_areas) @ C).tocsr()
        W, constraint = mesh.edge_diamond_area, None
    else:
        raise ValueError(f"space_kind must be cell, vertex or edge, got {space_kind!r}")

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(K.shape[0])
    if constraint is not None:
        x -= constraint @ x / constraint.sum()
    history = []
    mu_old = np.inf
    for _ in range(max_iter):
        x /= np.sqrt(W @ x**2)
        y, _ = solve_cg(SparseSystem(K, W * x, constraint=constraint, tol=1e-12))
        mu = float(x @ (K @ x))  # Rayleigh quotient, x is W-normalised
        history.append(mu)
        if abs(mu - mu_old) <= rtol * mu:
            return float(1.0 / np.sqrt(mu))
        mu_old, x = mu, y
    raise PoincareError(f"power iteration stalled after {max_iter} steps", history)
