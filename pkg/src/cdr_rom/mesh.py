"""Structured triangulations of the unit square.

Vertices are numbered row-major, ``k = j * (n + 1) + i`` at ``(i / n, j / n)``.
Each square cell ``c = j * n + i`` is cut along its bottom-left to top-right
diagonal into a lower triangle ``2c`` and an upper triangle ``2c + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StructuredTriMesh:
    """Uniform triangulation of [0, 1]^2 with ``n_per_side`` cells per axis."""

    n_per_side: int
    vertices: np.ndarray  # (n_vertices, 2)
    triangles: np.ndarray  # (n_triangles, 3), counterclockwise
    boundary_vertex_flags: np.ndarray  # (n_vertices,) bool

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.n_per_side

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


def build_unit_square_mesh(n_per_side: int) -> StructuredTriMesh:
    """Build the uniform triangulation with ``2 * n**2`` triangles."""
    n = int(n_per_side)
    if n != n_per_side or n < 1:
        raise ValueError(f"n_per_side must be a positive integer, got {n_per_side!r}")

    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    ii, jj = ii.ravel(), jj.ravel()
    vertices = np.column_stack([ii / n, jj / n]).astype(float)
    boundary = (ii == 0) | (ii == n) | (jj == 0) | (jj == n)

    ci, cj = np.meshgrid(np.arange(n), np.arange(n))
    ci, cj = ci.ravel(), cj.ravel()
    v00 = cj * (n + 1) + ci
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    for arr in (vertices, triangles, boundary):
        arr.setflags(write=False)
    return StructuredTriMesh(n, vertices, triangles, boundary)


def _cell_index(coord: np.ndarray, n: int) -> np.ndarray:
    # points on a grid line belong to the lower-numbered cell
    return np.clip(np.ceil(coord * n).astype(np.int64) - 1, 0, n - 1)


def locate_points(mesh: StructuredTriMesh, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`locate_point` for an ``(m, 2)`` array of points.

    Returns triangle indices ``(m,)`` and barycentric coordinates ``(m, 3)``
    ordered like the triangle's vertices.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(x < 0.0) or np.any(x > 1.0) or not np.all(np.isfinite(x)):
        raise ValueError("points must lie in the closed unit square")
    n = mesh.n_per_side
    i = _cell_index(x[:, 0], n)
    j = _cell_index(x[:, 1], n)
    dx = x[:, 0] * n - i
    dy = x[:, 1] * n - j
    is_lower = dy <= dx
    tri = 2 * (j * n + i) + np.where(is_lower, 0, 1)

    # local coordinates inside the cell, scaled to [0, 1]^2
    bary = np.empty((x.shape[0], 3))
    # lower (v00, v10, v11): point = v00 + dx e_x + dy e_y
    bary[:, 0] = np.where(is_lower, 1.0 - dx, 1.0 - dy)
    bary[:, 1] = np.where(is_lower, dx - dy, dx)
    bary[:, 2] = np.where(is_lower, dy, dy - dx)
    np.clip(bary, 0.0, 1.0, out=bary)
    bary /= bary.sum(axis=1, keepdims=True)
    return tri, bary


def locate_point(mesh: StructuredTriMesh, x) -> tuple[int, np.ndarray]:
    """Find the triangle containing ``x`` and its barycentric coordinates.

    Constant time: the cell follows from the scaled coordinates and the
    sub-triangle from the side of the cell diagonal. Points on shared edges
    go to the triangle with the lowest index.
    """
    tri, bary = locate_points(mesh, np.asarray(x, dtype=float).reshape(1, 2))
    return int(tri[0]), bary[0]
