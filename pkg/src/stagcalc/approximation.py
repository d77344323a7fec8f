"""Restriction and prolongation between smooth and discrete vector fields.

Two flavours are provided.  The general one works on fields tangent to the
wall and is measured through ``(curl, div)``; the Stokes one works on
compactly supported divergence-free fields ``u = perp grad psi`` and is
measured through ``(psi, curl)``.  ``restrict_by_edge_averaging`` is the
naive alternative (average ``u . n`` along an edge), kept because it does
not converge strongly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .decomposition import integrate_stream, reconstruct_from_curl_div
from .fields import CellField, EdgeField, VertexField, _Field
from .mesh import StaggeredMesh
from .operators import curl, div, skew_grad
from .quadrature import mesh_fan

Scalar = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SmoothVectorField:
    """A smooth field ``u`` with its curl, divergence and (optionally) stream.

    ``u(x, y)`` returns the pair of components.  The caller is responsible
    for the boundary behaviour the chosen restriction assumes.
    """

    u: Callable[[np.ndarray, np.ndarray], tuple]
    omega: Scalar
    delta: Scalar
    psi: Scalar | None = None
    grad_omega_sup: float | None = None
    grad_delta_sup: float | None = None
    name: str = "u"

    @classmethod
    def zero(cls):
        z = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
        return cls(lambda x, y: (z(x, y), z(x, y)), z, z, z, 0.0, 0.0, "zero")

    @classmethod
    def from_stream(cls, psi, psi_x, psi_y, lap_psi, grad_lap_sup=None, name="u"):
        """``u = (-psi_y, psi_x)``, so curl u = lap psi and div u = 0."""
        return cls(lambda x, y: (-psi_y(x, y), psi_x(x, y)), lap_psi,
                   lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
                   psi, grad_lap_sup, 0.0, name)


def bubble_stream() -> SmoothVectorField:
    """``psi = [x(1-x) y(1-y)]^2`` on the unit square (psi and grad psi vanish on the wall)."""
    def q(s):
        return s * (1 - s)

    def dq(s):
        return 1 - 2 * s

    def psi(x, y):
        return (q(x) * q(y)) ** 2

    def psi_x(x, y):
        return 2 * q(x) * dq(x) * q(y) ** 2

    def psi_y(x, y):
        return 2 * q(y) * dq(y) * q(x) ** 2

    def lap(x, y):
        # d2/ds2 q^2 = 2 dq^2 - 4 q
        return (2 * dq(x) ** 2 - 4 * q(x)) * q(y) ** 2 + (2 * dq(y) ** 2 - 4 * q(y)) * q(x) ** 2

    return SmoothVectorField.from_stream(psi, psi_x, psi_y, lap, name="bubble")


def compact_bump(radius: float = 0.3, center=(0.5, 0.5)) -> SmoothVectorField:
    """Stream ``(1 - r^2/R^2)^4`` inside a disc of radius ``R``, zero outside."""
    x0, y0 = center
    R2 = radius**2

    def s(x, y):
        return np.clip(1 - ((x - x0) ** 2 + (y - y0) ** 2) / R2, 0.0, None)

    def lap(x, y):
        r2 = (x - x0) ** 2 + (y - y0) ** 2
        return -16 * s(x, y) ** 3 / R2 + 48 * r2 * s(x, y) ** 2 / R2**2

    return SmoothVectorField.from_stream(
        lambda x, y: s(x, y) ** 4,
        lambda x, y: -8 * s(x, y) ** 3 * (x - x0) / R2,
        lambda x, y: -8 * s(x, y) ** 3 * (y - y0) / R2,
        lap, name="bump")


def trig_field() -> SmoothVectorField:
    """``perp grad(sin sin) + grad(cos cos)`` on the unit square, tangent to the wall."""
    pi = np.pi

    def u(x, y):
        s, c = np.sin, np.cos
        ux = -pi * s(pi * x) * c(pi * y) - pi * s(pi * x) * c(pi * y)
        uy = pi * c(pi * x) * s(pi * y) - pi * c(pi * x) * s(pi * y)
        return ux, uy

    def omega(x, y):
        return -2 * pi**2 * np.sin(pi * x) * np.sin(pi * y)

    def delta(x, y):
        return -2 * pi**2 * np.cos(pi * x) * np.cos(pi * y)

    return SmoothVectorField(u, omega, delta, None, 2 * pi**3, 2 * pi**3, "trig")


@dataclass(frozen=True)
class FImage:
    """Pair of scalar fields standing for an element of F."""

    first: _Field
    second: _Field

    def norm(self) -> float:
        return float(np.hypot(self.first.norm(), self.second.norm()))


# -- general space -----------------------------------------------------------------

def restrict_general(u: SmoothVectorField, mesh: StaggeredMesh, tol: float = 1e-12) -> EdgeField:
    """Edge field whose curl is ``omega`` at dual centers and whose div is the
    cell average of ``delta``."""
    omega = VertexField(mesh, np.broadcast_to(
        u.omega(mesh.vertex_centers[:, 0], mesh.vertex_centers[:, 1]), (mesh.n_vertices,)))
    d = mesh_fan(mesh, "cell").averages(u.delta)
    d = d - mesh.cell_areas @ d / mesh.cell_areas.sum()  # quadrature leaves a tiny mean
    return reconstruct_from_curl_div(omega, CellField(mesh, d), tol)


def prolong_general(u_h: EdgeField) -> FImage:
    return FImage(curl(u_h), div(u_h))


# -- Stokes space ------------------------------------------------------------------

def sample_stream(u: SmoothVectorField, mesh: StaggeredMesh) -> VertexField:
    """Stream values at dual centers, zero on dual cells touching the wall."""
    if u.psi is None:
        raise ValueError("restrict_stokes needs a stream function")
    vc = mesh.vertex_centers
    vals = np.array(np.broadcast_to(u.psi(vc[:, 0], vc[:, 1]), (mesh.n_vertices,)))
    vals[mesh.boundary_vertex_mask] = 0.0
    return VertexField(mesh, vals)


def restrict_stokes(u: SmoothVectorField, mesh: StaggeredMesh) -> EdgeField:
    return skew_grad(sample_stream(u, mesh))


def prolong_stokes(u_h: EdgeField) -> FImage:
    """``(psi_h, curl u_h)`` with psi_h gauged to zero on the wall."""
    mesh = u_h.mesh
    wall = np.flatnonzero(mesh.boundary_vertex_mask)
    anchor = int(wall[0]) if wall.size else 0
    psi = integrate_stream(u_h, anchor=anchor)
    return FImage(psi, curl(u_h))


# -- naive averaging -----------------------------------------------------------------

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)


def restrict_by_edge_averaging(u: SmoothVectorField, mesh: StaggeredMesh,
                               edge_choice: str = "primary") -> EdgeField:
    """Mean of ``u . n_e`` along the primary or the dual edge (3-point Gauss)."""
    if edge_choice == "primary":
        ev = mesh.edge_vertices
        a = mesh.vertex_centers[ev[:, 0]]
        b = np.where(ev[:, 1:2] >= 0, mesh.vertex_centers[np.maximum(ev[:, 1], 0)],
                     mesh.edge_point)
    elif edge_choice == "dual":
        a = mesh.cell_centers[mesh.edge_cells[:, 0]]
        b = mesh.cell_centers[mesh.edge_cells[:, 1]]
    else:
        raise ValueError(f"edge_choice must be 'primary' or 'dual', got {edge_choice!r}")
    n = mesh.edge_normal
    total = np.zeros(mesh.n_edges)
    for s, w in zip(0.5 * (_GAUSS_X + 1), 0.5 * _GAUSS_W):
        p = a + s * (b - a)
        ux, uy = u.u(p[:, 0], p[:, 1])
        total += w * (ux * n[:, 0] + uy * n[:, 1])
    return EdgeField(mesh, total)


# -- strong consistency ----------------------------------------------------------------

def _l2_gap(field: _Field, fn: Scalar, measure: str = "projected") -> float:
    """L2 distance between a piecewise-constant field and a smooth function.

    ``projected`` compares against the cell averages of ``fn`` (degree-2
    rule, as in the restriction); ``true`` integrates the squared
    difference with a degree-5 rule.
    """
    fan = mesh_fan(field.mesh, field.kind)
    vals = field.values
    if measure == "projected":
        diff = vals - fan.averages(fn, 2)
        return float(np.sqrt(fan.poly_area @ diff**2))
    if measure == "true":
        def sq(x, y):
            return (vals[fan.owner][:, None] - fn(x, y)) ** 2
        return float(np.sqrt(fan.integrals(sq, 5).sum()))
    raise ValueError(f"measure must be 'projected' or 'true', got {measure!r}")


def c1_error(u: SmoothVectorField, variant: str, mesh: StaggeredMesh,
             u_h: EdgeField | None = None, measure: str = "projected") -> float:
    """L2 distance in F between ``P_h R_h u`` and ``Pi u``.

    Pass ``u_h`` to measure a different restriction (for example
    :func:`restrict_by_edge_averaging`) under the same prolongation.
    """
    if variant == "general":
        if u_h is None:
            u_h = restrict_general(u, mesh)
        img = prolong_general(u_h)
        parts = (_l2_gap(img.first, u.omega, measure), _l2_gap(img.second, u.delta, measure))
    elif variant == "stokes":
        if u_h is None:
            u_h = restrict_stokes(u, mesh)
        img = prolong_stokes(u_h)
        parts = (_l2_gap(img.first, u.psi, measure), _l2_gap(img.second, u.omega, measure))
    else:
        raise ValueError(f"variant must be 'general' or 'stokes', got {variant!r}")
    return float(np.hypot(*parts))


def consistency_bound(u: SmoothVectorField, mesh: StaggeredMesh) -> float:
    """``sqrt(2 |Omega| (|grad omega|_inf^2 + |grad delta|_inf^2)) h``."""
    if u.grad_omega_sup is None or u.grad_delta_sup is None:
        raise ValueError("field does not carry the sup norms of grad omega / grad delta")
    return float(np.sqrt(2 * mesh.domain_area * (u.grad_omega_sup**2 + u.grad_delta_sup**2))
                 * mesh.h)
