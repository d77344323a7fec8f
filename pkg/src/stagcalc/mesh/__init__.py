"""Staggered primal/dual meshes."""
from .core import StaggeredMesh, from_dual_complex
from .generators import build_quad_mesh, build_tri_hex_mesh, build_voronoi_mesh
from .io import MeshFormatError, read_mesh, write_mesh
from .validation import ValidationReport, validate

__all__ = ["StaggeredMesh", "from_dual_complex", "build_quad_mesh",
           "build_tri_hex_mesh", "build_voronoi_mesh", "MeshFormatError",
           "read_mesh", "write_mesh", "ValidationReport", "validate"]
