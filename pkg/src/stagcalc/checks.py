"""Verification suites shared by the CLI and the acceptance tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approximation import SmoothVectorField, restrict_by_edge_averaging
from .decomposition import helmholtz_decompose
from .fields import CellField, EdgeField, VertexField
from .mesh import StaggeredMesh, build_tri_hex_mesh
from .operators import assemble, curl, div, grad, skew_grad

IDENTITY_TOLERANCES = {
    "ibp_grad_div": 1e-12,
    "ibp_skew_curl": 1e-12,
    "ibp_skew_curl_wall_zero_u": 1e-12,
    "curl_grad": 1e-13,
    "div_skew_grad": 1e-13,
    "helmholtz_orthogonality": 1e-10,
}


def _rel(a: float, b: float, floor: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def identity_suite(mesh: StaggeredMesh, n_fields: int = 100, seed: int = 0,
                   n_helmholtz: int = 3) -> dict[str, float]:
    """Worst defect of each exact discrete identity over random fields.

    Integration-by-parts defects are relative to the larger side, with a
    floor of ``1e-14`` times the norms of the two paired edge fields.  The
    exact-sequence residuals are divided by the size of the terms that
    cancel, ``|curl| |grad| |phi|`` (entrywise absolute values), so the
    measure does not depend on the mesh scale.
    """
    rng = np.random.default_rng(seed)
    Ca = abs(assemble(mesh, "curl").matrix)
    Ga = abs(assemble(mesh, "grad").matrix)
    Da = abs(assemble(mesh, "div").matrix)
    Sa = abs(assemble(mesh, "skew_grad").matrix)
    wall = mesh.boundary_edges
    worst = dict.fromkeys(IDENTITY_TOLERANCES, 0.0)
    for k in range(n_fields):
        phi = CellField(mesh, rng.standard_normal(mesh.n_cells))
        psi = VertexField(mesh, rng.standard_normal(mesh.n_vertices))
        u = EdgeField(mesh, rng.standard_normal(mesh.n_edges))
        uz = u.values.copy()
        uz[wall] = 0.0
        uz = EdgeField(mesh, uz)

        gphi = grad(phi)
        lhs, rhs = u.inner(gphi), -0.5 * div(u).inner(phi)
        worst["ibp_grad_div"] = max(worst["ibp_grad_div"],
                                    _rel(lhs, rhs, 1e-14 * u.norm() * gphi.norm()))
        spsi = skew_grad(psi)
        for key, v in (("ibp_skew_curl", u), ("ibp_skew_curl_wall_zero_u", uz)):
            lhs, rhs = v.inner(spsi), -0.5 * curl(v).inner(psi)
            worst[key] = max(worst[key], _rel(lhs, rhs, 1e-14 * v.norm() * spsi.norm()))

        cg = np.abs(curl(gphi).values).max()
        worst["curl_grad"] = max(worst["curl_grad"],
                                 float(cg / (Ca @ (Ga @ np.abs(phi.values))).max()))
        ds = np.abs(div(spsi).values).max()
        worst["div_skew_grad"] = max(worst["div_skew_grad"],
                                     float(ds / (Da @ (Sa @ np.abs(psi.values))).max()))

        if k < n_helmholtz:
            p, f = helmholtz_decompose(u)
            a, b = skew_grad(p), grad(f)
            worst["helmholtz_orthogonality"] = max(
                worst["helmholtz_orthogonality"], abs(a.inner(b)) / (a.norm() * b.norm()))
    return worst


# -- averaging counterexample ------------------------------------------------------

DIV_VALUE = lambda a, b: (a + b) / (2 * np.sqrt(3))  # noqa: E731
CURL_VALUE = lambda a: 2 * np.sqrt(3) * a / 23  # noqa: E731


def _zero(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def shear_field(a: float, b: float) -> SmoothVectorField:
    """``u = (a y, b x)``: divergence free, curl ``b - a``."""
    return SmoothVectorField(lambda x, y: (a * np.asarray(y), b * np.asarray(x)),
                             lambda x, y: (b - a) + _zero(x, y), _zero, name="shear")


def stretch_field(a: float, b: float) -> SmoothVectorField:
    """``u = (a x, b y)``: curl free, divergence ``a + b``."""
    return SmoothVectorField(lambda x, y: (a * np.asarray(x), b * np.asarray(y)),
                             _zero, lambda x, y: (a + b) + _zero(x, y), name="stretch")


@dataclass
class CounterexampleLevel:
    refinement: int
    h: float
    div_values: np.ndarray
    curl_values: np.ndarray
    div_l2: float
    curl_l2: float
    div_mean: float


def _value_set(vals, digits=10):
    # round before unique so that +-0 and 1e-16 noise collapse
    out = np.unique(np.round(vals, digits))
    return out + 0.0


def counterexample(refinements=(1, 2, 3), a: float = 1.0, b: float = 2.0,
                   curl_b: float = 0.0) -> list[CounterexampleLevel]:
    """Averaging restriction on tri-hex meshes.

    Divergence of the dual-edge average of ``(a y, b x)`` on interior
    primary cells, and curl of the primary-edge average of
    ``(a x, curl_b y)`` on interior dual cells.
    """
    shear, stretch = shear_field(a, b), stretch_field(a, curl_b)
    out = []
    for r in refinements:
        mesh = build_tri_hex_mesh(r)
        d = div(restrict_by_edge_averaging(shear, mesh, "dual")).values
        ni = mesh.n_interior_cells
        di, ai = d[:ni], mesh.cell_areas[:ni]
        c = curl(restrict_by_edge_averaging(stretch, mesh, "primary")).values
        inner = ~mesh.boundary_vertex_mask
        ci, av = c[inner], mesh.vertex_areas[inner]
        out.append(CounterexampleLevel(
            r, mesh.h, _value_set(di), _value_set(ci),
            float(np.sqrt(ai @ di**2)), float(np.sqrt(av @ ci**2)),
            float(ai @ di / ai.sum())))
    return out


def value_set_matches(values: np.ndarray, expected, tol: float = 1e-10) -> bool:
    """Every value is within ``tol`` of an expected one, and vice versa."""
    values = np.asarray(values, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if values.size == 0:
        return False
    hit_v = np.abs(values[:, None] - expected[None, :]).min(axis=1) <= tol
    hit_e = np.abs(expected[:, None] - values[None, :]).min(axis=1) <= tol
    return bool(hit_v.all() and hit_e.all())
