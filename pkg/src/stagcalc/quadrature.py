"""Cell averages over polygons by fanning into triangles."""
from __future__ import annotations

import weakref

import numpy as np

_R15 = np.sqrt(15.0)
_A1, _B1 = (9 - 2 * _R15) / 21, (6 + _R15) / 21
_A2, _B2 = (9 + 2 * _R15) / 21, (6 - _R15) / 21

# (barycentric points, weights) on the reference triangle, weights sum to 1
_RULES = {
    # edge midpoints, exact for quadratics
    2: (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        np.full(3, 1.0 / 3.0)),
    # 7-point degree-5 rule (Radon)
    5: (np.array([[1 / 3, 1 / 3, 1 / 3],
                  [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
                  [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2]]),
        np.array([9 / 40, *[(155 + _R15) / 1200] * 3, *[(155 - _R15) / 1200] * 3])),
}


def _centroid(p):
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    if abs(a) < 1e-300:
        return p.mean(axis=0)
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6 * a)


class PolygonFan:
    """Triangles ``(centroid, p_k, p_{k+1})`` for a list of simple polygons.

    Triangle areas are signed, so ``area`` can be negative for polygons
    that are not star-shaped about their centroid.
    """

    def __init__(self, polygons):
        tris, owner = [], []
        for j, p in enumerate(polygons):
            p = np.asarray(p, dtype=float)
            c = _centroid(p)
            q = np.roll(p, -1, axis=0)
            tris.append(np.stack([np.broadcast_to(c, p.shape), p, q], axis=1))
            owner.append(np.full(len(p), j))
        self.n = len(polygons)
        self.tris = np.concatenate(tris) if tris else np.empty((0, 3, 2))
        self.owner = np.concatenate(owner) if owner else np.empty(0, dtype=int)
        a, b, c = self.tris[:, 0], self.tris[:, 1], self.tris[:, 2]
        # signed areas, so non-star-shaped (clipped) polygons still decompose exactly
        signed = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                        - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
        orient = np.sign(np.bincount(self.owner, signed, minlength=self.n))
        self.area = signed * orient[self.owner]
        self.poly_area = np.bincount(self.owner, self.area, minlength=self.n)

    def integrals(self, fn, degree: int = 2) -> np.ndarray:
        """Integral of ``fn(x, y)`` over every polygon."""
        bary, w = _RULES[degree]
        pts = np.einsum("qk,tkd->tqd", bary, self.tris)
        vals = np.asarray(fn(pts[..., 0], pts[..., 1]), dtype=float)
        vals = np.broadcast_to(vals, pts.shape[:2])
        per_tri = self.area * (vals @ w)
        return np.bincount(self.owner, per_tri, minlength=self.n)

    def averages(self, fn, degree: int = 2) -> np.ndarray:
        return self.integrals(fn, degree) / self.poly_area


_fans: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def mesh_fan(mesh, which: str) -> PolygonFan:
    """Cached fan of ``cell`` or ``vertex`` polygons of a mesh."""
    per = _fans.setdefault(mesh, {})
    if which not in per:
        polys = mesh.cell_polygons if which == "cell" else mesh.vertex_polygons
        if len(polys) == 0:
            raise ValueError("mesh carries no polygons (read from file?); "
                             "cell averages need the generated geometry")
        per[which] = PolygonFan(polys)
    return per[which]


def cell_averages(mesh, fn, degree: int = 2) -> np.ndarray:
    return mesh_fan(mesh, "cell").averages(fn, degree)


def vertex_averages(mesh, fn, degree: int = 2) -> np.ndarray:
    return mesh_fan(mesh, "vertex").averages(fn, degree)
