"""Mesh families: uniform quadrilateral, triangle/hexagon, Delaunay-Voronoi."""
from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial import Delaunay

from .core import StaggeredMesh, from_dual_complex

SQRT3 = np.sqrt(3.0)


def build_quad_mesh(nx: int, ny: int, domain=(0.0, 1.0, 0.0, 1.0)) -> StaggeredMesh:
    """Quadrilateral staggered grid (the classical MAC layout).

    Primary centers sit on the ``(nx+1) x (ny+1)`` lattice, boundary included;
    dual centers are the ``nx * ny`` lattice-cell midpoints.
    """
    if nx < 2 or ny < 2:
        raise ValueError(f"need nx, ny >= 2 for an interior cell, got {nx}x{ny}")
    x0, x1, y0, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain {domain}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    faces, centers = [], []
    for i in range(nx):
        for j in range(ny):
            faces.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)])
            centers.append([0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])])
    h = max((x1 - x0) / nx, (y1 - y0) / ny)
    return from_dual_complex(nodes, faces, np.array(centers), h, family="quad")


# ---------------------------------------------------------------------------
# triangle / hexagon mesh with one-third crossings
# ---------------------------------------------------------------------------

def _reflect(p, a, b):
    d = (b - a) / np.hypot(*(b - a))
    q = p - a
    return a + 2 * (q @ d) * d - q


def build_tri_hex_mesh(refinement: int, size: float = 1.0) -> StaggeredMesh:
    """Equilateral primary triangles with equiangular, non-uniform hexagonal duals.

    The triangular lattice has side ``s = size / 2**(refinement + 1)``; the
    domain is the union of the hexagons around the lattice points
    ``(i, j), 0 <= i, j <= 2**(refinement + 1)`` of a rhombic patch, so its
    boundary is made of dual edges and passes through triangle centers.

    Triangle centers are placed so that every dual edge is perpendicular to
    the triangle side it crosses and is bisected by it (neighboring centers
    are mirror images across their common side).  Seeding one triangle with
    the point whose feet on its sides sit at 1/3, 1/2 and 2/3 of the side and
    propagating by reflection is consistent: around every lattice point the
    six reflections compose to the identity.  Each triangle side is then
    crossed either at its midpoint or at a one-third point.
    """
    if refinement < 1:
        raise ValueError(f"refinement must be >= 1, got {refinement}")
    n = 2 ** (refinement + 1)
    s = size / n
    e1 = np.array([s, 0.0])
    e2 = np.array([0.5 * s, 0.5 * SQRT3 * s])

    def lattice(i, j):
        return i * e1 + j * e2

    # triangles touching the patch: up (i,j): (i,j),(i+1,j),(i,j+1);
    # down (i,j): (i+1,j),(i+1,j+1),(i,j+1)
    tris = {}
    for i in range(-1, n + 1):
        for j in range(-1, n + 1):
            tris[("u", i, j)] = ((i, j), (i + 1, j), (i, j + 1))
            tris[("d", i, j)] = ((i + 1, j), (i + 1, j + 1), (i, j + 1))
    by_side: dict[tuple, list] = {}
    for key, vs in tris.items():
        for a in range(3):
            side = tuple(sorted((vs[a], vs[(a + 1) % 3])))
            by_side.setdefault(side, []).append(key)

    # seed: up triangle (0,0) with A=(0,0), B=(1,0), C=(0,1); foot at 1/3 on AB
    # from A, 1/2 on BC, 2/3 on CA from C
    seed = ("u", 0, 0)
    center = {seed: np.array([s / 3.0, s / (3.0 * SQRT3)])}
    queue = deque([seed])
    while queue:
        key = queue.popleft()
        vs = tris[key]
        for a in range(3):
            side = tuple(sorted((vs[a], vs[(a + 1) % 3])))
            for nb in by_side[side]:
                if nb != key and nb not in center:
                    center[nb] = _reflect(center[key], lattice(*side[0]), lattice(*side[1]))
                    queue.append(nb)

    patch = [(i, j) for i in range(n + 1) for j in range(n + 1)]
    node_of: dict[tuple, int] = {}
    nodes, faces, face_centers = [], [], []
    # the six triangles around lattice point (i,j), counter-clockwise
    ring = lambda i, j: [("u", i, j), ("d", i - 1, j), ("u", i - 1, j),
                         ("d", i - 1, j - 1), ("u", i, j - 1), ("d", i, j - 1)]
    for (i, j) in patch:
        face = []
        for key in ring(i, j):
            if key not in node_of:
                node_of[key] = len(nodes)
                nodes.append(center[key])
            face.append(node_of[key])
        faces.append(face)
        face_centers.append(lattice(i, j))
    return from_dual_complex(np.array(nodes), faces, np.array(face_centers), s,
                             family="trihex")


# ---------------------------------------------------------------------------
# Delaunay-Voronoi mesh
# ---------------------------------------------------------------------------

def _cross2(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _circumcenter(a, b, c):
    # relative to a, which keeps short Voronoi edges accurate
    bx, by = b[0] - a[0], b[1] - a[1]
    cx, cy = c[0] - a[0], c[1] - a[1]
    d = 2.0 * (bx * cy - by * cx)
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    return np.array([a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d])


def _boundary_points(poly: np.ndarray, spacing: float) -> np.ndarray:
    pts = []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        k = max(1, int(round(np.hypot(*(b - a)) / spacing)))
        for t in np.arange(k) / k:
            pts.append(a + t * (b - a))
    return np.array(pts)


def _inside(poly: np.ndarray, pts: np.ndarray, margin: float) -> np.ndarray:
    # convex CCW polygon
    ok = np.ones(len(pts), dtype=bool)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        t = (b - a) / np.hypot(*(b - a))
        inward = np.array([-t[1], t[0]])
        ok &= (pts - a) @ inward > margin
    return ok


def _clear_boundary_disks(bpts: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Push generators out of the diametral disks of boundary segments.

    A generator inside such a disk makes the boundary triangle obtuse at the
    generator, so its circumcenter (a dual center) falls outside the domain.
    """
    pts = pts.copy()
    a, b = bpts, np.roll(bpts, -1, axis=0)
    mid = 0.5 * (a + b)
    r = 0.55 * np.hypot(*(b - a).T)
    for k in range(len(mid)):
        d = pts - mid[k]
        dist = np.hypot(d[:, 0], d[:, 1])
        hit = dist < r[k]
        if hit.any():
            pts[hit] = mid[k] + d[hit] * (r[k] / np.maximum(dist[hit], 1e-300))[:, None]
    return pts


def _merged_delaunay(points: np.ndarray, tol: float):
    """Delaunay triangulation with cocircular neighbours merged into polygons.

    Returns faces (node cycles) and their circumcenters.  Merging keeps the
    dual mesh a true Voronoi dual: cocircular groups share one Voronoi vertex.
    """
    tri = Delaunay(points)
    if len(tri.coplanar):
        raise ValueError(f"triangulation dropped {len(tri.coplanar)} input points")
    simp = tri.simplices
    cc = np.array([_circumcenter(*points[s]) for s in simp])
    parent = list(range(len(simp)))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for k, nbs in enumerate(tri.neighbors):
        for nb in nbs:
            if nb > k and np.hypot(*(cc[k] - cc[nb])) < tol:
                parent[find(nb)] = find(k)
    groups: dict[int, list[int]] = {}
    for k in range(len(simp)):
        groups.setdefault(find(k), []).append(k)

    faces, centers = [], []
    for members in groups.values():
        if len(members) == 1:
            faces.append(list(simp[members[0]]))
        else:
            # boundary of the union of triangles, chained into a cycle
            count: dict[tuple, int] = {}
            directed = {}
            for k in members:
                s = simp[k]
                if _cross2(points[s[1]] - points[s[0]], points[s[2]] - points[s[0]]) < 0:
                    s = s[::-1]
                for a, b in zip(s, np.roll(s, -1)):
                    key = (min(a, b), max(a, b))
                    count[key] = count.get(key, 0) + 1
                    directed[key] = (a, b)
            nxt = {directed[k][0]: directed[k][1] for k, c in count.items() if c == 1}
            start = next(iter(nxt))
            cyc = [start]
            while nxt[cyc[-1]] != start:
                cyc.append(nxt[cyc[-1]])
            faces.append(cyc)
        centers.append(cc[members].mean(axis=0))
    return faces, np.array(centers)


def build_voronoi_mesh(seed_count: int, domain=None, lloyd_iters: int = 0,
                       rng_seed: int = 0, seeds=None) -> StaggeredMesh:
    """Delaunay-Voronoi staggered grid on a convex polygon.

    Voronoi cells are the primary cells and Delaunay triangles the dual
    cells, so every edge pair is orthogonal by construction.  Generators are
    split between the domain boundary (evenly spaced, so the boundary runs
    through boundary cell centers) and the interior (uniform random, then
    ``lloyd_iters`` Lloyd sweeps moving each interior generator to the
    centroid of its Voronoi cell).

    Passing ``seeds`` explicitly uses those points as the generators and
    their convex hull as the domain; ``seed_count`` must then equal
    ``len(seeds)``.
    """
    if seed_count < 4:
        raise ValueError(f"seed_count must be >= 4, got {seed_count}")
    if seeds is not None:
        pts = np.asarray(seeds, dtype=float)
        if len(pts) != seed_count:
            raise ValueError("seed_count does not match len(seeds)")
        faces, centers = _merged_delaunay(pts, 1e-9 * np.ptp(pts))
        area = sum(0.5 * abs(_cross2(pts[f[1]] - pts[f[0]], pts[f[2]] - pts[f[0]]))
                   for f in faces if len(f) == 3)
        area += sum(_poly_area(pts[f]) for f in faces if len(f) > 3)
        return from_dual_complex(pts, faces, centers, np.sqrt(area / seed_count),
                                 family="voronoi")

    poly = np.asarray(domain if domain is not None else
                      [(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
    if _poly_area(poly) < 0:
        poly = poly[::-1]
    area = _poly_area(poly)
    perim = sum(np.hypot(*(b - a)) for a, b in zip(poly, np.roll(poly, -1, axis=0)))
    # split the generators so that boundary and interior spacing agree:
    # n_b ~ perim / h, n_i ~ area / h^2, n_b + n_i = seed_count
    h = _solve_spacing(area, perim, seed_count)
    bpts = _boundary_points(poly, h)
    n_int = seed_count - len(bpts)
    if n_int < 1:
        raise ValueError(f"seed_count {seed_count} too small for an interior generator")
    rng = np.random.default_rng(rng_seed)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    interior = np.empty((0, 2))
    while len(interior) < n_int:
        cand = lo + (hi - lo) * rng.random((4 * n_int, 2))
        cand = cand[_inside(poly, cand, 0.5 * h)]
        interior = np.vstack([interior, cand])[:n_int]
    interior = _clear_boundary_disks(bpts, interior)
    tol = 1e-9 * h
    for _ in range(lloyd_iters):
        pts = np.vstack([interior, bpts])
        faces, centers = _merged_delaunay(pts, tol)
        interior = _clear_boundary_disks(bpts, _lloyd_step(pts, faces, centers,
                                                           n_int, poly, h))
    pts = np.vstack([interior, bpts])
    faces, centers = _merged_delaunay(pts, tol)
    return from_dual_complex(pts, faces, centers, h, family="voronoi")


def _solve_spacing(area, perim, n):
    # perim/h + area/h^2 = n  ->  n h^2 - perim h - area = 0
    return (perim + np.sqrt(perim**2 + 4 * n * area)) / (2 * n)


def _poly_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _poly_centroid(p):
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6 * a)


def _lloyd_step(pts, faces, centers, n_int, poly, h):
    """Move interior generators to the centroids of their Voronoi cells."""
    around: list[list[int]] = [[] for _ in range(len(pts))]
    for k, f in enumerate(faces):
        for v in f:
            around[v].append(k)
    new = pts[:n_int].copy()
    for i in range(n_int):
        ring = centers[around[i]]
        ang = np.arctan2(ring[:, 1] - pts[i, 1], ring[:, 0] - pts[i, 0])
        cell = ring[np.argsort(ang)]
        if len(cell) >= 3 and abs(_poly_area(cell)) > 0:
            new[i] = _poly_centroid(cell)
    # keep generators strictly inside, away from the fixed boundary row
    keep = _inside(poly, new, 0.5 * h)
    new[~keep] = pts[:n_int][~keep]
    return new
