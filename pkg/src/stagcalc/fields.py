"""Piecewise-constant fields on primary cells, dual cells and edges.

A field is just a coefficient vector bound to one mesh.  Mixing fields from
different mesh objects is refused, even if the meshes are equal.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .mesh import StaggeredMesh


class MeshMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class _Field:
    mesh: StaggeredMesh
    values: np.ndarray

    kind = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self._size(self.mesh),):
            raise ValueError(f"{type(self).__name__} needs {self._size(self.mesh)} "
                             f"values, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise ValueError(f"{type(self).__name__} has non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @staticmethod
    def _size(mesh) -> int:
        raise NotImplementedError

    def weights(self) -> np.ndarray:
        raise NotImplementedError

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(cls._size(mesh)))

    @classmethod
    def constant(cls, mesh, c: float):
        return cls(mesh, np.full(cls._size(mesh), float(c)))

    @classmethod
    def from_function(cls, mesh, fn):
        """Sample ``fn(x, y)`` at the element centers."""
        pts = cls._points(mesh)
        return cls(mesh, np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float)
                   * np.ones(len(pts)))

    def _check(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.mesh.token != self.mesh.token:
            raise MeshMismatchError("fields live on different meshes")

    def __add__(self, other):
        self._check(other)
        return type(self)(self.mesh, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.mesh, self.values - other.values)

    def __mul__(self, c: float):
        return type(self)(self.mesh, float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.mesh, -self.values)

    def inner(self, other) -> float:
        self._check(other)
        return float(np.dot(self.weights() * self.values, other.values))

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.weights(), self.values**2)))

    def mean(self) -> float:
        """Area-weighted average."""
        w = self.weights()
        return float(np.dot(w, self.values) / w.sum())

    def to_csv(self, path, mesh_file: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if mesh_file is not None:
                fh.write(f"# mesh {mesh_file}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "index", "value"])
            for k, v in enumerate(self.values):
                w.writerow([self.kind, k, format(v, ".17g")])


class CellField(_Field):
    kind = "cell"

    @staticmethod
    def _size(mesh):
        return mesh.n_cells

    @staticmethod
    def _points(mesh):
        return mesh.cell_centers

    def weights(self):
        return self.mesh.cell_areas


class VertexField(_Field):
    kind = "vertex"

    @staticmethod
    def _size(mesh):
        return mesh.n_vertices

    @staticmethod
    def _points(mesh):
        return mesh.vertex_centers

    def weights(self):
        return self.mesh.vertex_areas


class EdgeField(_Field):
    """Normal components ``u_e`` of a discrete vector field."""

    kind = "edge"

    @staticmethod
    def _size(mesh):
        return mesh.n_edges

    @staticmethod
    def _points(mesh):
        return mesh.edge_point

    def weights(self):
        return self.mesh.edge_diamond_area

    @classmethod
    def from_function(cls, mesh, fn):
        """Normal component of the vector field ``fn(x, y) -> (u, v)`` at crossings."""
        p = mesh.edge_point
        u, v = fn(p[:, 0], p[:, 1])
        n = mesh.edge_normal
        return cls(mesh, np.asarray(u) * n[:, 0] + np.asarray(v) * n[:, 1])


def norm_l2_cell(phi: CellField) -> float:
    return phi.norm()


def norm_l2_vertex(psi: VertexField) -> float:
    return psi.norm()


def norm_l2_edge(u: EdgeField) -> float:
    return u.norm()


def inner_cell(a: CellField, b: CellField) -> float:
    return a.inner(b)


def inner_vertex(a: VertexField, b: VertexField) -> float:
    return a.inner(b)


def inner_edge(a: EdgeField, b: EdgeField) -> float:
    return a.inner(b)


def semi_h1_edge(u: EdgeField) -> float:
    """sqrt(|div u|^2 + |curl u|^2)."""
    from .operators import curl, div
    return float(np.hypot(div(u).norm(), curl(u).norm()))
