"""Jacobi-preconditioned conjugate gradients for the symmetric systems."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


class AsymmetricMatrixError(SolverError):
    pass


class ConvergenceError(SolverError):
    """CG hit ``max_iter``; the best iterate seen is attached."""

    def __init__(self, msg, best, residual, stats):
        super().__init__(msg)
        self.best = best
        self.residual = residual
        self.stats = stats


@dataclass
class SolveStats:
    iterations: int
    residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    energy_history: list[float] = field(default_factory=list)

    def write_history(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "relative_residual", "energy"])
            for k, (r, e) in enumerate(zip(self.residual_history, self.energy_history)):
                w.writerow([k, format(r, ".17g"), format(e, ".17g")])


@dataclass
class SparseSystem:
    """``A x = b`` with ``A`` symmetric positive (semi)definite.

    ``constraint`` is a weight vector ``w``; when given, ``A`` is expected to
    have the constant vector as its null space and the solution is
    normalised so that ``w . x = 0``.
    """

    matrix: sp.spmatrix
    rhs: np.ndarray
    constraint: np.ndarray | None = None
    tol: float = 1e-10
    max_iter: int | None = None
    x0: np.ndarray | None = None

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = self.rhs.shape[0]
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match rhs length {n}")
        if self.max_iter is None:
            self.max_iter = 10 * n


def check_symmetric(matrix, probes: int = 3, tol: float = 1e-12, seed: int = 12345) -> float:
    """Largest relative defect of ``y.Ax - x.Ay`` over random probes."""
    rng = np.random.default_rng(seed)
    n = matrix.shape[0]
    worst = 0.0
    for _ in range(probes):
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        ax, ay = matrix @ x, matrix @ y
        scale = np.linalg.norm(ax) * np.linalg.norm(y) + np.linalg.norm(ay) * np.linalg.norm(x)
        if scale > 0:
            worst = max(worst, abs(y @ ax - x @ ay) / scale)
    if worst > tol:
        raise AsymmetricMatrixError(f"matrix is not symmetric (relative defect {worst:.3g})")
    return worst


def _project(x, w):
    return x - (w @ x) / w.sum()


def solve_cg(system: SparseSystem) -> tuple[np.ndarray, SolveStats]:
    A, b = system.matrix, system.rhs.copy()
    check_symmetric(A)
    w = system.constraint
    if w is not None:
        w = np.asarray(w, dtype=float)
        b -= b.mean()  # drop the part outside the range of A

    # work with b scaled to unit max entry so tiny data cannot underflow
    scale = float(np.abs(b).max(initial=0.0))
    if scale == 0.0:
        return np.zeros_like(b), SolveStats(0, 0.0, True, [0.0], [0.0])
    b /= scale
    bnorm = np.linalg.norm(b)

    diag = A.diagonal()
    if (diag <= 0).any():
        raise SolverError("Jacobi preconditioner needs a positive diagonal")
    M = sp.diags(1.0 / diag)

    x_start = (np.zeros_like(b) if system.x0 is None
               else np.asarray(system.x0, float) / scale)
    res_hist, en_hist = [], []
    best = {"x": x_start.copy(), "r": np.inf}

    def record(xk):
        ax = A @ xk
        r = np.linalg.norm(b - ax) / bnorm
        res_hist.append(float(r))
        en_hist.append(float((0.5 * xk @ ax - b @ xk) * scale**2))
        if r < best["r"]:
            best["x"], best["r"] = xk.copy(), r

    record(x_start)
    x, used = x_start, 0
    # restart on a stale recursive residual, which scipy trusts at exit
    for _ in range(4):
        x, info = spla.cg(A, b, x0=x, rtol=system.tol, atol=0.0,
                          maxiter=system.max_iter - used, M=M, callback=record)
        used = len(res_hist) - 1
        if res_hist[-1] <= system.tol or info != 0 or used >= system.max_iter:
            break
    x = x * scale
    if w is not None:
        x = _project(x, w)
    final = res_hist[-1]
    stats = SolveStats(len(res_hist) - 1, final, final <= system.tol,
                       res_hist, en_hist)
    if not stats.converged:
        xb = best["x"] * scale
        xb = xb if w is None else _project(xb, w)
        raise ConvergenceError(
            f"CG did not reach rtol {system.tol:g} in {system.max_iter} iterations "
            f"(best relative residual {best['r']:.3g})", xb, best["r"], stats)
    return x, stats
