"""Staggered-grid discrete vector calculus on unstructured orthogonal meshes."""
