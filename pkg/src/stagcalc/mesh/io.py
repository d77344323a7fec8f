"""Plain-text ``stagmesh v1`` reader and writer.

Layout::

    stagmesh v1
    # family quad
    Nc Ncb Nv Ne Neb h
    [primary]
    index cx cy area boundary_flag
    [dual]
    index cx cy area
    [edges]
    index nx ny le de diamond_area ix iy  nCE (cell sign)*  nVE (vertex sign)*

Indices are 0-based.  Floats use 17 significant digits, which round-trips
IEEE doubles exactly.
"""
from __future__ import annotations

import os

import numpy as np

from .core import StaggeredMesh
from .validation import _connectivity_findings

MAGIC = "stagmesh v1"


class MeshFormatError(ValueError):
    pass


def _f(x: float) -> str:
    return format(float(x), ".17g")


def write_mesh(mesh: StaggeredMesh, path) -> None:
    nc, ncb, nv, ne, neb = mesh.counts
    lines = [MAGIC, f"# family {mesh.family}",
             f"{nc} {ncb} {nv} {ne} {neb} {_f(mesh.h)}", "[primary]"]
    for i, (c, a, b) in enumerate(zip(mesh.cell_centers, mesh.cell_areas,
                                      mesh.cell_is_boundary)):
        lines.append(f"{i} {_f(c[0])} {_f(c[1])} {_f(a)} {int(b)}")
    lines.append("[dual]")
    for v, (c, a) in enumerate(zip(mesh.vertex_centers, mesh.vertex_areas)):
        lines.append(f"{v} {_f(c[0])} {_f(c[1])} {_f(a)}")
    lines.append("[edges]")
    for e in range(mesh.n_edges):
        n, p = mesh.edge_normal[e], mesh.edge_point[e]
        parts = [str(e), _f(n[0]), _f(n[1]), _f(mesh.edge_le[e]), _f(mesh.edge_de[e]),
                 _f(mesh.edge_diamond_area[e]), _f(p[0]), _f(p[1]), "2"]
        for k in range(2):
            parts += [str(mesh.edge_cells[e, k]), str(mesh.edge_cell_sign[e, k])]
        verts = [k for k in range(2) if mesh.edge_vertices[e, k] >= 0]
        parts.append(str(len(verts)))
        for k in verts:
            parts += [str(mesh.edge_vertices[e, k]), str(mesh.edge_vertex_sign[e, k])]
        lines.append(" ".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _section(lines, pos, name, count):
    if pos >= len(lines):
        raise MeshFormatError(f"missing section [{name}]")
    if lines[pos] != f"[{name}]":
        raise MeshFormatError(f"expected [{name}] at line {pos + 1}, found {lines[pos]!r}")
    rows = lines[pos + 1:pos + 1 + count]
    if len(rows) < count or any(r.startswith("[") for r in rows):
        got = next((k for k, r in enumerate(rows) if r.startswith("[")), len(rows))
        raise MeshFormatError(f"section [{name}] truncated: expected {count} rows, got {got}")
    return [r.split() for r in rows], pos + 1 + count


def _row_index(name, k, fields, width):
    if len(fields) < width:
        raise MeshFormatError(f"[{name}] row {k}: expected {width} fields, got {len(fields)}")
    if int(fields[0]) != k:
        raise MeshFormatError(f"[{name}] row {k}: index {fields[0]} out of order")


def read_mesh(path) -> StaggeredMesh:
    """Parse a ``stagmesh v1`` file.

    Raises :class:`MeshFormatError` on structural problems, naming the
    first offending section or element.
    """
    with open(path) as fh:
        raw = [ln.strip() for ln in fh]
    family = "custom"
    lines = []
    for ln in raw:
        if ln.startswith("# family"):
            family = ln.split(maxsplit=2)[2]
        elif ln and not ln.startswith("#"):
            lines.append(ln)
    if not lines or lines[0] != MAGIC:
        raise MeshFormatError(f"not a {MAGIC} file: {os.fspath(path)}")
    if len(lines) < 2:
        raise MeshFormatError("missing counts line")
    head = lines[1].split()
    if len(head) != 6:
        raise MeshFormatError("counts line must be 'Nc Ncb Nv Ne Neb h'")
    try:
        nc, ncb, nv, ne, neb = (int(x) for x in head[:5])
        h = float(head[5])
    except ValueError as exc:
        raise MeshFormatError(f"bad counts line: {exc}") from None
    euler = nc + ncb + nv - (ne + neb + 1)
    if euler != 0:
        raise MeshFormatError(f"Euler identity violated: Nc+Ncb+Nv-(Ne+Neb+1) = {euler}")

    try:
        prim, pos = _section(lines, 2, "primary", nc + ncb)
        dual, pos = _section(lines, pos, "dual", nv)
        edges, pos = _section(lines, pos, "edges", ne + neb)
    except ValueError as exc:
        if isinstance(exc, MeshFormatError):
            raise
        raise MeshFormatError(str(exc)) from None
    if pos != len(lines):
        raise MeshFormatError(f"unexpected content after [edges] at line {pos + 1}")

    try:
        for k, r in enumerate(prim):
            _row_index("primary", k, r, 5)
        for k, r in enumerate(dual):
            _row_index("dual", k, r, 4)
        cells = np.array([[float(x) for x in r[1:4]] for r in prim]).reshape(-1, 3)
        boundary = np.array([int(r[4]) for r in prim], dtype=bool)
        verts = np.array([[float(x) for x in r[1:4]] for r in dual]).reshape(-1, 3)

        E = ne + neb
        geo = np.empty((E, 7))
        ec = np.empty((E, 2), dtype=np.int64)
        cs = np.empty((E, 2), dtype=np.int64)
        ev = np.full((E, 2), -1, dtype=np.int64)
        vs = np.zeros((E, 2), dtype=np.int64)
        for e, r in enumerate(edges):
            _row_index("edges", e, r, 9)
            geo[e] = [float(x) for x in r[1:8]]
            ncell = int(r[8])
            if ncell != 2:
                raise MeshFormatError(f"edge {e}: |CE| = {ncell}, expected 2")
            k = 9
            for slot in range(2):
                ec[e, slot], cs[e, slot] = int(r[k]), int(r[k + 1])
                k += 2
            nvert = int(r[k])
            k += 1
            if len(r) != k + 2 * nvert:
                raise MeshFormatError(f"edge {e}: VE list length does not match count {nvert}")
            for slot in range(nvert):
                ev[e, slot], vs[e, slot] = int(r[k]), int(r[k + 1])
                k += 2
    except MeshFormatError:
        raise
    except (ValueError, IndexError) as exc:
        raise MeshFormatError(f"parse error: {exc}") from None

    if boundary[:nc].any() or not boundary[nc:].all():
        bad = int(np.flatnonzero(boundary[:nc])[0]) if boundary[:nc].any() \
            else nc + int(np.flatnonzero(~boundary[nc:])[0])
        raise MeshFormatError(f"primary cell {bad}: boundary flag breaks interior-first order")

    mesh = StaggeredMesh(
        cell_centers=cells[:, :2], cell_areas=cells[:, 2], cell_is_boundary=boundary,
        vertex_centers=verts[:, :2], vertex_areas=verts[:, 2],
        edge_normal=geo[:, 0:2], edge_le=geo[:, 2], edge_de=geo[:, 3],
        edge_diamond_area=geo[:, 4], edge_point=geo[:, 5:7],
        edge_cells=ec, edge_cell_sign=cs, edge_vertices=ev, edge_vertex_sign=vs,
        n_interior_cells=nc, n_interior_edges=ne, h=h, family=family,
    )
    problems = _connectivity_findings(mesh)
    if problems:
        raise MeshFormatError(problems[0])
    return mesh
