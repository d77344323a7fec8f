"""MAC scheme for the incompressible Stokes problem in vorticity form.

The discrete velocity space is the image of ``skew_grad`` on stream
functions that vanish on every dual cell touching the wall.  Writing
``u_h = skew_grad(psi_h)`` the variational problem

    (curl u_h, curl v_h) = 2 (f_h, v_h)    for all v_h

turns into the symmetric system ``B^T M B psi = -B^T M psi_f`` with
``B = laplacian_vertex`` restricted to interior dual columns and ``M`` the
dual areas.  The forcing potential drops out; it only returns in the
pressure, which is integrated from the momentum balance on interior edges.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .approximation import SmoothVectorField, _l2_gap
from .decomposition import integrate_potential
from .fields import CellField, EdgeField, VertexField
from .linalg import ConvergenceError, SolveStats, SparseSystem, solve_cg
from .mesh import (StaggeredMesh, build_quad_mesh, build_tri_hex_mesh,
                   build_voronoi_mesh)
from .operators import assemble, curl, div, grad, skew_grad
from .quadrature import mesh_fan

Scalar = Callable[[np.ndarray, np.ndarray], np.ndarray]


SOLVE_TOL = 1e-10


class PressureRecoveryError(RuntimeError):
    pass


@dataclass(frozen=True)
class StokesForcing:
    """``f = perp grad psi_f + grad phi_f`` and its discrete counterpart."""

    psi_f: Scalar
    phi_f: Scalar
    psi_f_h: VertexField
    phi_f_h: CellField
    f_h: EdgeField


@dataclass
class StokesSolution:
    u_h: EdgeField
    psi_h: VertexField
    omega_h: VertexField
    p_h: CellField | None
    stats: SolveStats
    energy_lhs: float
    energy_rhs: float
    residual: float  # variational residual, relative to the right-hand side

    @property
    def energy_bound_holds(self) -> bool:
        return self.energy_lhs <= self.energy_rhs * (1 + 1e-10)


def discretize_forcing(psi_f: Scalar, phi_f: Scalar, mesh: StaggeredMesh) -> StokesForcing:
    """Average the forcing potentials over dual / primary cells."""
    psi_h = VertexField(mesh, mesh_fan(mesh, "vertex").averages(psi_f))
    phi = mesh_fan(mesh, "cell").averages(phi_f)
    phi_h = CellField(mesh, phi - mesh.cell_areas @ phi / mesh.cell_areas.sum())
    return StokesForcing(psi_f, phi_f, psi_h, phi_h, skew_grad(psi_h) + grad(phi_h))


def _stream_system(mesh):
    interior = np.flatnonzero(~mesh.boundary_vertex_mask)
    B = assemble(mesh, "laplacian_vertex").matrix[:, interior].tocsc()
    K = (B.T @ sp.diags(mesh.vertex_areas) @ B).tocsr()
    return interior, B, K


def _refine(x, stats, B, areas, psi_f, K):
    """One correction step with the residual formed as ``-B^T M (B x + psi_f)``.

    Assembling ``K x`` loses the small difference to roundoff; in factored
    form the cancellation happens in ``B x + psi_f``, which is small.
    """
    def resid(y):
        return -(B.T @ (areas * (B @ y + psi_f)))

    r = resid(x)
    try:
        d, more = solve_cg(SparseSystem(K, r, tol=1e-4))
    except ConvergenceError as err:
        d, more = err.best, err.stats
    stats.iterations += more.iterations
    y = x + d
    return (y, stats) if np.linalg.norm(resid(y)) < np.linalg.norm(r) else (x, stats)


def solve_stokes(forcing: StokesForcing, mesh: StaggeredMesh, tol: float = SOLVE_TOL,
                 with_pressure: bool = True) -> StokesSolution:
    if forcing.f_h.mesh.token != mesh.token:
        raise ValueError("forcing was discretised on a different mesh")
    interior, B, K = _stream_system(mesh)
    psi_f = forcing.psi_f_h.values
    rhs = -(B.T @ (mesh.vertex_areas * psi_f))
    x, stats = solve_cg(SparseSystem(K, rhs, tol=tol))
    x, stats = _refine(x, stats, B, mesh.vertex_areas, psi_f, K)

    psi = np.zeros(mesh.n_vertices)
    psi[interior] = x
    psi_h = VertexField(mesh, psi)
    u_h = skew_grad(psi_h)
    omega_h = curl(u_h)

    # residual of the variational equation against every interior indicator
    r = B.T @ (mesh.vertex_areas * (omega_h.values + psi_f))
    scale = np.abs(rhs).max(initial=0.0)
    residual = float(np.abs(r).max(initial=0.0) / scale) if scale > 0 else float(np.abs(r).max(initial=0.0))

    sol = StokesSolution(u_h, psi_h, omega_h, None, stats,
                         energy_lhs=omega_h.norm(), energy_rhs=forcing.psi_f_h.norm(),
                         residual=residual)
    if with_pressure:
        sol.p_h = recover_pressure(sol, forcing, mesh)
    return sol


def momentum_source(solution: StokesSolution, forcing: StokesForcing) -> EdgeField:
    """``g = f + skew_grad(curl u)``, which must equal ``grad p`` on interior edges."""
    return forcing.f_h + skew_grad(solution.omega_h)


def recover_pressure(solution: StokesSolution, forcing: StokesForcing,
                     mesh: StaggeredMesh, tol: float = 1e-9) -> CellField:
    """Zero-mean pressure with ``grad p = g`` on interior edges.

    Cells reachable only through wall edges (the corners of a quad mesh)
    are attached along those edges using the same ``g``.
    """
    g = momentum_source(solution, forcing)
    cg = curl(g).values
    inner = ~mesh.boundary_vertex_mask
    # curl f and curl skew_grad(omega) cancel; measure against their size
    C = abs(assemble(mesh, "curl").matrix)
    terms = C @ (np.abs(forcing.f_h.values) + np.abs(skew_grad(solution.omega_h).values))
    bad = np.abs(cg[inner]) > tol * np.maximum(terms[inner], 1.0)
    if bad.any():
        nu = int(np.flatnonzero(inner)[np.argmax(bad)])
        raise PressureRecoveryError(
            f"curl of the momentum source is {cg[nu]:.3g} on interior dual cell {nu}; "
            "velocity is not a discrete solution")
    return integrate_potential(g, edges=mesh.interior_edges, tol=tol)


def momentum_residual(solution: StokesSolution, forcing: StokesForcing) -> float:
    """Max over interior edges of ``|-skew_grad(curl u) + grad p - f|``."""
    r = (grad(solution.p_h) - momentum_source(solution, forcing)).values
    return float(np.abs(r[:solution.u_h.mesh.n_interior_edges]).max(initial=0.0))


# -- convergence studies -------------------------------------------------------

def build_family(family: str, level: int) -> StaggeredMesh:
    if family == "quad":
        return build_quad_mesh(level, level)
    if family == "trihex":
        return build_tri_hex_mesh(level)
    if family == "voronoi":
        return build_voronoi_mesh(level, lloyd_iters=20)
    raise ValueError(f"unknown mesh family {family!r}")


@dataclass
class ConvergenceRecord:
    rows: list[dict] = field(default_factory=list)

    COLUMNS = ("level", "h", "e_psi", "e_omega", "order_psi", "order_omega",
               "energy_lhs", "energy_rhs", "cg_iters")

    def add(self, **row):
        if self.rows:
            prev = self.rows[-1]
            ratio = np.log(prev["h"] / row["h"])
            for key in ("psi", "omega"):
                a, b = prev[f"e_{key}"], row[f"e_{key}"]
                row[f"order_{key}"] = (float(np.log(a / b) / ratio)
                                       if a > 0 and b > 0 and ratio != 0 else float("nan"))
        else:
            row["order_psi"] = row["order_omega"] = float("nan")
        self.rows.append(row)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([r[c] if isinstance(r[c], (int, np.integer)) else format(r[c], ".17g")
                            for c in self.COLUMNS])


def _study_level(exact, exact_p, mesh_family, level, tol, measure) -> dict:
    mesh = build_family(mesh_family, level)
    forcing = discretize_forcing(lambda x, y: -exact.omega(x, y), exact_p, mesh)
    sol = solve_stokes(forcing, mesh, tol=tol)
    return dict(level=int(level), h=mesh.h,
                e_psi=_l2_gap(sol.psi_h, exact.psi, measure),
                e_omega=_l2_gap(sol.omega_h, exact.omega, measure),
                energy_lhs=sol.energy_lhs, energy_rhs=sol.energy_rhs,
                cg_iters=sol.stats.iterations,
                momentum_residual=momentum_residual(sol, forcing),
                div_max=float(np.abs(div(sol.u_h).values).max()),
                energy_ok=sol.energy_bound_holds)


def convergence_study(exact: SmoothVectorField, exact_p: Scalar, mesh_family: str,
                      levels, tol: float = SOLVE_TOL, measure: str = "projected",
                      workers: int = 1) -> ConvergenceRecord:
    """Solve the manufactured problem on each level and record F-norm errors.

    The forcing is ``psi_f = -lap psi`` and ``phi_f = p``.  Levels are
    independent and run on ``workers`` threads; rows keep the level order.
    """
    def run(level):
        return _study_level(exact, exact_p, mesh_family, level, tol, measure)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, levels))
    else:
        rows = [run(level) for level in levels]
    record = ConvergenceRecord()
    for row in rows:
        record.add(**row)
    return record


def manufactured_pressure(x, y):
    """``p = x^3 - 1/4``, zero mean on the unit square."""
    return np.asarray(x, dtype=float) ** 3 - 0.25
