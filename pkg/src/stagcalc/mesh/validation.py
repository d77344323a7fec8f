"""Structural and geometric checks on a :class:`StaggeredMesh`."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import StaggeredMesh


@dataclass
class ValidationReport:
    euler_residual: int
    orthogonality_defect: np.ndarray
    convex: np.ndarray
    m: float
    M: float
    bisection_defect: float
    bisection_ratio: float
    connectivity_ok: bool
    findings: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """No structural finding.  Non-convex diamonds only warn."""
        return not self.findings

    def rows(self) -> list[tuple[str, str]]:
        """Key/value pairs for tabular display."""
        return [
            ("euler_residual", str(self.euler_residual)),
            ("max_orthogonality_defect", f"{self.orthogonality_defect.max(initial=0.0):.6g}"),
            ("nonconvex_edges", str(int((~self.convex).sum()))),
            ("m", f"{self.m:.6g}"),
            ("M", f"{self.M:.6g}"),
            ("bisection_defect", f"{self.bisection_defect:.6g}"),
            ("bisection_defect_over_h2", f"{self.bisection_ratio:.6g}"),
            ("connectivity_ok", str(self.connectivity_ok)),
            ("status", "ok" if self.ok else "FAIL"),
        ]


def _segment_param(p, a, b):
    ab = b - a
    return np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab)


def _connectivity_findings(mesh: StaggeredMesh) -> list[str]:
    out: list[str] = []
    ne = mesh.n_interior_edges
    nc, nv = mesh.n_cells, mesh.n_vertices
    ec, ev = mesh.edge_cells, mesh.edge_vertices
    if ec.min(initial=0) < 0 or ec.max(initial=0) >= nc:
        out.append("edge cell index out of range")
        return out
    if ev.max(initial=-1) >= nv:
        out.append("edge vertex index out of range")
        return out

    for e in range(mesh.n_edges):
        nverts = int((ev[e] >= 0).sum())
        want = 2 if e < ne else 1
        if nverts != want:
            out.append(f"edge {e}: |VE| = {nverts}, expected {want}")
            return out
        if ec[e, 0] == ec[e, 1]:
            out.append(f"edge {e}: repeated cell in CE")
            return out
        if e >= ne and ev[e, 0] < 0:
            out.append(f"edge {e}: boundary vertex not in first slot")
            return out

    cs, vs = mesh.edge_cell_sign, mesh.edge_vertex_sign
    bad = np.flatnonzero(cs.sum(axis=1) != 0)
    if bad.size:
        out.append(f"edge {bad[0]}: cell indicators do not cancel")
        return out
    bad = np.flatnonzero(vs[:ne].sum(axis=1) != 0)
    if bad.size:
        out.append(f"edge {bad[0]}: vertex indicators do not cancel")
        return out

    # indicators must agree with the geometry
    n, t = mesh.edge_normal, mesh.edge_tangent
    p = mesh.edge_point
    for slot in range(2):
        away = np.einsum("ij,ij->i", n, p - mesh.cell_centers[ec[:, slot]]) > 0
        bad = np.flatnonzero(np.where(away, 1, -1) != cs[:, slot])
        if bad.size:
            out.append(f"edge {bad[0]}: cell indicator for cell {ec[bad[0], slot]} "
                       "disagrees with the normal")
            return out
    vc = mesh.vertex_centers
    if ne:
        away = np.einsum("ij,ij->i", t[:ne], vc[ev[:ne, 1]] - vc[ev[:ne, 0]]) > 0
        bad = np.flatnonzero(np.where(away, 1, -1) != vs[:ne, 0])
        if bad.size:
            out.append(f"edge {bad[0]}: vertex indicator for dual cell "
                       f"{ev[bad[0], 0]} disagrees with the tangent")
            return out
    b = slice(ne, None)
    away = np.einsum("ij,ij->i", t[b], p[b] - vc[ev[b, 0]]) > 0
    bad = np.flatnonzero(np.where(away, 1, -1) != vs[b, 0])
    if bad.size:
        e = ne + bad[0]
        out.append(f"edge {e}: vertex indicator for dual cell {ev[e, 0]} "
                   "disagrees with the tangent")
    return out


def validate(mesh: StaggeredMesh) -> ValidationReport:
    """Run every mesh check and collect the findings.

    Never raises; problems are listed in ``report.findings``.
    """
    findings: list[str] = []
    warnings: list[str] = []
    try:
        euler = int(mesh.euler_residual)
    except Exception as exc:  # malformed arrays
        euler = -1
        findings.append(f"count error: {exc}")
    if euler != 0:
        findings.append(f"Euler residual {euler}")

    try:
        conn = _connectivity_findings(mesh)
    except Exception as exc:
        conn = [f"connectivity check crashed: {exc}"]
    findings += conn
    E = mesh.n_edges
    if conn:
        return ValidationReport(euler, np.zeros(E), np.zeros(E, dtype=bool),
                                np.nan, np.nan, np.nan, np.nan, False, findings)

    ne = mesh.n_interior_edges
    n = mesh.edge_normal
    ec, ev = mesh.edge_cells, mesh.edge_vertices
    c0 = mesh.cell_centers[ec[:, 0]]
    c1 = mesh.cell_centers[ec[:, 1]]
    v0 = mesh.vertex_centers[ev[:, 0]]
    v1 = np.where(ev[:, 1:2] >= 0, mesh.vertex_centers[np.maximum(ev[:, 1], 0)],
                  mesh.edge_point)
    p = mesh.edge_point

    dual_dir = (c1 - c0) / mesh.edge_de[:, None]
    prim = v1 - v0
    prim_len = np.hypot(prim[:, 0], prim[:, 1])
    cross = np.abs(np.einsum("ij,ij->i", prim, n)) / np.where(prim_len > 0, prim_len, 1)
    ortho = np.maximum(np.abs(np.abs(np.einsum("ij,ij->i", dual_dir, n)) - 1), cross)
    if ortho.max(initial=0) > 1e-10:
        findings.append(f"edge {int(ortho.argmax())}: orthogonality defect {ortho.max():.3g}")

    unit = np.abs(np.hypot(n[:, 0], n[:, 1]) - 1)
    if unit.max(initial=0) > 1e-14:
        findings.append(f"edge {int(unit.argmax())}: normal not unit length")

    eps = 1e-12
    sd = _segment_param(p, c0, c1)
    convex = (sd > eps) & (sd < 1 - eps)
    sp = _segment_param(p[:ne], v0[:ne], v1[:ne])
    convex[:ne] &= (sp > eps) & (sp < 1 - eps)
    if not convex.all():
        warnings.append(f"edge {int(np.flatnonzero(~convex)[0])}: diamond not convex")

    if (mesh.cell_areas <= 0).any():
        findings.append(f"primary cell {int(np.argmin(mesh.cell_areas))}: nonpositive area")
    if (mesh.vertex_areas <= 0).any():
        findings.append(f"dual cell {int(np.argmin(mesh.vertex_areas))}: nonpositive area")

    lengths = np.concatenate([mesh.edge_le, mesh.edge_de]) / mesh.h
    m, M = float(lengths.min()), float(lengths.max())

    if ne:
        off_d = np.hypot(*(p[:ne] - 0.5 * (c0[:ne] + c1[:ne])).T)
        off_p = np.hypot(*(p[:ne] - 0.5 * (v0[:ne] + v1[:ne])).T)
        bis = float(max(off_d.max(), off_p.max()))
    else:
        bis = 0.0

    return ValidationReport(euler, ortho, convex, m, M, bis, bis / mesh.h**2,
                            True, findings, warnings)
