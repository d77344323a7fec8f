"""Staggered primal/dual mesh container and the generic constructor.

Every mesh family in this package is produced by :func:`from_dual_complex`.
The input is the *dual* mesh seen as a polygonal complex:

* nodes      -- primary cell centers (the dual-cell corners),
* faces      -- dual cells, each an ordered cycle of node indices,
* face centers -- the dual-cell centers (primary-cell corners).

The domain is the union of the faces.  Nodes on the outer boundary of that
union become boundary primary cells, whose area is clipped to the domain.
Edges of the complex become edge pairs; an edge on the outer boundary is a
boundary edge pair whose primary edge is clipped at the boundary.

Indices are 0-based.  Interior cells come first (``0 .. n_interior_cells-1``),
likewise interior edges.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import itertools

import numpy as np

#: Fixed reference direction used to orient edge normals deterministically.
ORIENTATION_PROBE = np.array([1.0, 0.3])

_token_counter = itertools.count()


def _shoelace(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(x[:-1] @ y[1:] - x[1:] @ y[:-1] + x[-1] * y[0] - x[0] * y[-1])


@dataclass(frozen=True, eq=False)
class StaggeredMesh:
    """Primal/dual mesh pair with edge-pair geometry and direction indicators.

    Attributes
    ----------
    cell_centers, cell_areas, cell_is_boundary
        Primary cells.  Boundary cells store their in-domain (clipped) area.
    vertex_centers, vertex_areas
        Dual cells.
    edge_normal, edge_le, edge_de, edge_point
        Per edge pair: unit normal ``n_e`` (along the dual edge), primary
        edge length ``l_e`` (clipped on boundary edges), dual edge length
        ``d_e`` and the crossing point of the two edges.
    edge_cells, edge_cell_sign
        ``CE(e)`` as an ``(E, 2)`` array and the indicators ``n_{e,i}``.
    edge_vertices, edge_vertex_sign
        ``VE(e)`` as an ``(E, 2)`` array padded with ``-1`` / sign ``0``
        on boundary edges, and the indicators ``t_{e,nu}``.
    """

    cell_centers: np.ndarray
    cell_areas: np.ndarray
    cell_is_boundary: np.ndarray
    vertex_centers: np.ndarray
    vertex_areas: np.ndarray
    edge_normal: np.ndarray
    edge_le: np.ndarray
    edge_de: np.ndarray
    edge_diamond_area: np.ndarray
    edge_point: np.ndarray
    edge_cells: np.ndarray
    edge_cell_sign: np.ndarray
    edge_vertices: np.ndarray
    edge_vertex_sign: np.ndarray
    n_interior_cells: int
    n_interior_edges: int
    h: float
    family: str = "custom"
    cell_polygons: tuple = field(default=(), repr=False)
    vertex_polygons: tuple = field(default=(), repr=False)
    token: int = field(default_factory=lambda: next(_token_counter), repr=False)

    # -- counts -----------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return len(self.cell_areas)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_areas)

    @property
    def n_edges(self) -> int:
        return len(self.edge_le)

    @property
    def counts(self) -> tuple[int, int, int, int, int]:
        """``(N_c, N_cb, N_v, N_e, N_eb)``."""
        return (self.n_interior_cells, self.n_cells - self.n_interior_cells,
                self.n_vertices, self.n_interior_edges,
                self.n_edges - self.n_interior_edges)

    @property
    def euler_residual(self) -> int:
        nc, ncb, nv, ne, neb = self.counts
        return nc + ncb + nv - (ne + neb + 1)

    @property
    def edge_tangent(self) -> np.ndarray:
        # t_e = k x n_e
        n = self.edge_normal
        return np.column_stack([-n[:, 1], n[:, 0]])

    @property
    def interior_edges(self) -> np.ndarray:
        return np.arange(self.n_interior_edges)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.arange(self.n_interior_edges, self.n_edges)

    @cached_property
    def boundary_vertex_mask(self) -> np.ndarray:
        """Dual cells owning at least one boundary edge."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edge_vertices[self.n_interior_edges:, 0]] = True
        return mask

    @property
    def domain_area(self) -> float:
        return float(self.vertex_areas.sum())

    # -- connectivity sets (Table 1 of the construction) ---------------------
    @cached_property
    def EC(self) -> list[np.ndarray]:
        """Edges bounding each primary cell."""
        return _invert(self.edge_cells, self.n_cells)

    @cached_property
    def EV(self) -> list[np.ndarray]:
        """Edges bounding each dual cell."""
        return _invert(self.edge_vertices, self.n_vertices)

    @property
    def CE(self) -> list[np.ndarray]:
        return [row for row in self.edge_cells]

    @property
    def VE(self) -> list[np.ndarray]:
        return [row[row >= 0] for row in self.edge_vertices]

    @cached_property
    def VC(self) -> list[np.ndarray]:
        """Dual cells forming the corners of each primary cell."""
        out = []
        for edges in self.EC:
            v = self.edge_vertices[edges].ravel()
            out.append(np.unique(v[v >= 0]))
        return out

    @cached_property
    def CV(self) -> list[np.ndarray]:
        """Primary cells forming the corners of each dual cell."""
        return [np.unique(self.edge_cells[edges].ravel()) for edges in self.EV]

    def __repr__(self) -> str:
        nc, ncb, nv, ne, neb = self.counts
        return (f"StaggeredMesh(family={self.family!r}, Nc={nc}, Ncb={ncb}, "
                f"Nv={nv}, Ne={ne}, Neb={neb}, h={self.h:.6g})")


def _invert(pairs: np.ndarray, n: int) -> list[np.ndarray]:
    buckets: list[list[int]] = [[] for _ in range(n)]
    for e, row in enumerate(pairs):
        for k in row:
            if k >= 0:
                buckets[k].append(e)
    return [np.array(b, dtype=np.int64) for b in buckets]


def from_dual_complex(nodes, faces, face_centers, h: float,
                      family: str = "custom") -> StaggeredMesh:
    """Build a :class:`StaggeredMesh` from a polygonal dual complex.

    Parameters
    ----------
    nodes : (N, 2) array
        Primary cell centers.
    faces : sequence of int sequences
        Dual cells as node cycles (either orientation).
    face_centers : (F, 2) array
        Dual cell centers.  For an orthogonal mesh the segment joining the
        centers of two adjacent faces must be perpendicular to their shared
        edge.
    h : float
        Mesh parameter.
    """
    nodes = np.asarray(nodes, dtype=float)
    face_centers = np.asarray(face_centers, dtype=float)
    faces = [np.asarray(f, dtype=np.int64) for f in faces]

    # orient every face counter-clockwise
    for k, f in enumerate(faces):
        if _shoelace(nodes[f]) < 0:
            faces[k] = f[::-1]

    edge_faces: dict[tuple[int, int], list[int]] = {}
    for k, f in enumerate(faces):
        for a, b in zip(f, np.roll(f, -1)):
            key = (min(a, b), max(a, b))
            edge_faces.setdefault(key, []).append(k)
    for key, fs in edge_faces.items():
        if len(fs) > 2:
            raise ValueError(f"edge {key} shared by {len(fs)} faces")

    used = np.zeros(len(nodes), dtype=bool)
    for f in faces:
        used[f] = True
    if not used.all():
        raise ValueError(f"{int((~used).sum())} nodes belong to no face")

    boundary_node = np.zeros(len(nodes), dtype=bool)
    for (a, b), fs in edge_faces.items():
        if len(fs) == 1:
            boundary_node[[a, b]] = True

    # renumber: interior cells first, then boundary cells
    cell_order = np.concatenate([np.flatnonzero(~boundary_node),
                                 np.flatnonzero(boundary_node)])
    cell_index = np.empty(len(nodes), dtype=np.int64)
    cell_index[cell_order] = np.arange(len(nodes))
    centers = nodes[cell_order]

    keys = sorted(edge_faces, key=lambda k: (len(edge_faces[k]) == 1,
                                             cell_index[k[0]] + cell_index[k[1]],
                                             min(cell_index[k[0]], cell_index[k[1]])))
    E = len(keys)
    K = np.array(keys, dtype=np.int64).reshape(E, 2)
    F = np.array([edge_faces[k] + [-1] * (2 - len(edge_faces[k])) for k in keys],
                 dtype=np.int64).reshape(E, 2)
    paired = F[:, 1] >= 0

    ia, ib = cell_index[K[:, 0]], cell_index[K[:, 1]]
    vec = centers[ib] - centers[ia]
    de = np.hypot(vec[:, 0], vec[:, 1])
    normal = vec / de[:, None]
    flip = normal @ ORIENTATION_PROBE < 0
    normal[flip] *= -1
    ecells = np.where(flip[:, None], np.column_stack([ib, ia]), np.column_stack([ia, ib]))
    ecsign = np.tile(np.array([1, -1], dtype=np.int64), (E, 1))  # n_e points away from the tail
    tangent = np.column_stack([-normal[:, 1], normal[:, 0]])

    # foot of each dual-cell center on the line through the two primary centers
    base = centers[ecells[:, 0]]
    fc = face_centers[np.where(F >= 0, F, 0)]
    proj = np.einsum("ij,isj->is", normal, fc - base[:, None, :])
    feet = base[:, None, :] + proj[:, :, None] * normal[:, None, :]
    point = np.where(paired[:, None], feet.mean(axis=1), feet[:, 0])
    le = np.where(paired, np.hypot(*(fc[:, 1] - fc[:, 0]).T),
                  np.hypot(*(fc[:, 0] - point).T))

    face_mean = np.array([nodes[f].mean(axis=0) for f in faces])
    side = np.einsum("ij,isj->is", tangent, face_mean[np.where(F >= 0, F, 0)] - point[:, None, :])
    everts = F.copy()
    evsign = np.where(side > 0, -1, 1).astype(np.int64)  # +1: t_e points away
    evsign[~paired, 1] = 0
    n_interior_edges = int(paired.sum())

    vertex_areas = np.array([_shoelace(nodes[f]) for f in faces])
    vertex_polys = tuple(nodes[f] for f in faces)

    edge_id = {k: e for e, k in enumerate(keys)}
    polys_by_node = _primary_polygons(faces, face_centers, nodes, edge_id, point)
    cell_polys = tuple(polys_by_node[j] for j in cell_order)
    cell_areas = np.array([abs(_shoelace(p)) for p in cell_polys])

    return StaggeredMesh(
        cell_centers=centers,
        cell_areas=cell_areas,
        cell_is_boundary=boundary_node[cell_order],
        vertex_centers=face_centers.copy(),
        vertex_areas=vertex_areas,
        edge_normal=normal,
        edge_le=le,
        edge_de=de,
        edge_diamond_area=0.5 * le * de,
        edge_point=point,
        edge_cells=ecells,
        edge_cell_sign=ecsign,
        edge_vertices=everts,
        edge_vertex_sign=evsign,
        n_interior_cells=int((~boundary_node).sum()),
        n_interior_edges=int(n_interior_edges),
        h=float(h),
        family=family,
        cell_polygons=cell_polys,
        vertex_polygons=vertex_polys,
    )


def _primary_polygons(faces, face_centers, node_xy, edge_id, point):
    """Counter-clockwise primary cell polygons, clipped on the boundary.

    A CCW face passing ``prev -> i -> next`` covers the angular sector at
    node ``i`` running counter-clockwise from edge ``(i, next)`` to edge
    ``(i, prev)``.  Chaining those sectors orders the faces around ``i``.
    """
    sectors: dict[int, dict[int, tuple[int, int]]] = {}
    for k, f in enumerate(faces):
        m = len(f)
        for j in range(m):
            i, nxt, prv = f[j], f[(j + 1) % m], f[j - 1]
            start = edge_id[(min(i, nxt), max(i, nxt))]
            end = edge_id[(min(i, prv), max(i, prv))]
            sectors.setdefault(int(i), {})[start] = (k, end)
    polys = []
    for i in range(len(node_xy)):
        sec = sectors[i]
        ends = {end for _, end in sec.values()}
        open_starts = [s for s in sec if s not in ends]
        if len(open_starts) > 1:
            raise ValueError(f"node {i} touches the boundary more than once")
        e = open_starts[0] if open_starts else min(sec)
        pts = [point[e]] if open_starts else []
        for _ in range(len(sec)):
            k, e = sec[e]
            pts.append(face_centers[k])
            if e not in sec:
                break
        if open_starts:
            pts += [point[e], node_xy[i]]
        polys.append(np.array(pts))
    return tuple(polys)
