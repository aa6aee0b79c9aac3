"""Continuous Lagrange P1/P2 spaces on :class:`StructuredTriMesh`.

Local dof order on a triangle ``(t0, t1, t2)`` is the three vertices, then
(P2 only) the midpoints of edges ``(t0, t1)``, ``(t1, t2)``, ``(t2, t0)``.
Global numbering puts vertex dofs first (row-major), then horizontal,
vertical and diagonal edge midpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from .mesh import StructuredTriMesh, locate_points

_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle with vertices (0,0), (1,0), (0,1).

    ``points`` are barycentric coordinates ``(nq, 3)``; ``weights`` sum to
    the reference area 1/2.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadratureRule:
    """Collapsed (conical product) Gauss rule exact for total degree ``degree``.

    Uses Gauss-Legendre along the collapsed direction and Gauss-Jacobi with
    weight ``(1 - t)`` across it, so a degree-d polynomial is integrated
    exactly with ``ceil((d + 1) / 2)**2`` points.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be non-negative")
    m = max(1, -(-(degree + 1) // 2))
    s, ws = leggauss(m)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    t, wt = roots_jacobi(m, 1.0, 0.0)
    t = 0.5 * (t + 1.0)
    wt = 0.25 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    x = (S * (1.0 - T)).ravel()
    y = T.ravel()
    points = np.column_stack([1.0 - x - y, x, y])
    weights = W.ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(degree, points, weights)


# reference basis in barycentric coordinates --------------------------------

def n_local_dofs(degree: int) -> int:
    return 3 if degree == 1 else 6


def shape_values(degree: int, bary: np.ndarray) -> np.ndarray:
    """Basis values at barycentric points, shape ``(..., nloc)``."""
    lam = np.asarray(bary, dtype=float)
    if degree == 1:
        return lam.copy()
    out = np.empty(lam.shape[:-1] + (6,))
    for a in range(3):
        out[..., a] = lam[..., a] * (2.0 * lam[..., a] - 1.0)
    for e, (a, b) in enumerate(_EDGES):
        out[..., 3 + e] = 4.0 * lam[..., a] * lam[..., b]
    return out


def shape_bary_derivatives(degree: int, bary: np.ndarray) -> np.ndarray:
    """Derivatives w.r.t. each barycentric coordinate, shape ``(..., nloc, 3)``."""
    lam = np.asarray(bary, dtype=float)
    if degree == 1:
        return np.broadcast_to(np.eye(3), lam.shape[:-1] + (3, 3)).copy()
    out = np.zeros(lam.shape[:-1] + (6, 3))
    for a in range(3):
        out[..., a, a] = 4.0 * lam[..., a] - 1.0
    for e, (a, b) in enumerate(_EDGES):
        out[..., 3 + e, a] = 4.0 * lam[..., b]
        out[..., 3 + e, b] = 4.0 * lam[..., a]
    return out


def shape_bary_hessians(degree: int) -> np.ndarray:
    """Constant second derivatives in barycentric coordinates, ``(nloc, 3, 3)``."""
    if degree == 1:
        return np.zeros((3, 3, 3))
    out = np.zeros((6, 3, 3))
    for a in range(3):
        out[a, a, a] = 4.0
    for e, (a, b) in enumerate(_EDGES):
        out[3 + e, a, b] = out[3 + e, b, a] = 4.0
    return out


# function space --------------------------------------------------------------

@dataclass(frozen=True)
class FunctionSpace:
    mesh: StructuredTriMesh
    degree: int
    dof_coords: np.ndarray  # (n_dofs_total, 2)
    cell_dof_map: np.ndarray  # (n_triangles, nloc)
    interior_dofs: np.ndarray  # sorted global indices of non-boundary dofs
    boundary_dof_flags: np.ndarray
    grad_lambda: np.ndarray  # (n_triangles, 3, 2) gradients of barycentric coords
    areas: np.ndarray  # (n_triangles,)

    @property
    def n_dofs_total(self) -> int:
        return self.dof_coords.shape[0]

    @property
    def n_interior(self) -> int:
        return self.interior_dofs.shape[0]

    @property
    def n_local(self) -> int:
        return self.cell_dof_map.shape[1]

    @property
    def h(self) -> float:
        """Element-size measure ``1 / (n * p)``."""
        return 1.0 / (self.mesh.n_per_side * self.degree)

    def embed(self, interior_coeffs: np.ndarray) -> np.ndarray:
        """Extend interior coefficients (vector or columns) by zero boundary values."""
        a = np.asarray(interior_coeffs, dtype=float)
        full = np.zeros((self.n_dofs_total,) + a.shape[1:])
        full[self.interior_dofs] = a
        return full

    def interpolate(self, func) -> np.ndarray:
        """Lagrange interpolant of ``func(x, y)`` on all dofs."""
        xy = self.dof_coords
        return np.asarray(func(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(len(xy))

    def evaluate(self, full_coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate a finite element function given on all dofs at ``points``."""
        tri, bary = locate_points(self.mesh, points)
        vals = shape_values(self.degree, bary)
        local = np.asarray(full_coeffs)[self.cell_dof_map[tri]]
        if local.ndim == 2:
            return np.einsum("mk,mk->m", vals, local)
        return np.einsum("mk,mkc->mc", vals, local)


def build_space(mesh: StructuredTriMesh, degree: int) -> FunctionSpace:
    """Build the continuous Lagrange space of the given degree (1 or 2)."""
    if degree not in (1, 2):
        raise ValueError(f"unsupported polynomial degree {degree!r}; expected 1 or 2")
    n = mesh.n_per_side
    tris = mesh.triangles
    nv = (n + 1) ** 2
    # integer lattice coordinates with spacing 1 / (2n)
    vi = np.arange(nv) % (n + 1)
    vj = np.arange(nv) // (n + 1)
    lattice = [np.column_stack([2 * vi, 2 * vj])]

    if degree == 1:
        cell_dofs = tris.copy()
    else:
        off_h = nv
        off_v = off_h + n * (n + 1)
        off_d = off_v + (n + 1) * n
        hi, hj = np.meshgrid(np.arange(n), np.arange(n + 1))
        lattice.append(np.column_stack([2 * hi.ravel() + 1, 2 * hj.ravel()]))
        vvi, vvj = np.meshgrid(np.arange(n + 1), np.arange(n))
        lattice.append(np.column_stack([2 * vvi.ravel(), 2 * vvj.ravel() + 1]))
        di, dj = np.meshgrid(np.arange(n), np.arange(n))
        lattice.append(np.column_stack([2 * di.ravel() + 1, 2 * dj.ravel() + 1]))

        c = np.arange(n * n)
        ci, cj = c % n, c // n
        h_bot = off_h + cj * n + ci
        h_top = off_h + (cj + 1) * n + ci
        v_left = off_v + cj * (n + 1) + ci
        v_right = v_left + 1
        diag = off_d + c
        cell_dofs = np.empty((2 * n * n, 6), dtype=np.int64)
        cell_dofs[:, :3] = tris
        cell_dofs[0::2, 3:] = np.column_stack([h_bot, v_right, diag])
        cell_dofs[1::2, 3:] = np.column_stack([diag, h_top, v_left])

    lat = np.vstack(lattice)
    dof_coords = lat / (2.0 * n)
    boundary = (lat[:, 0] == 0) | (lat[:, 0] == 2 * n) | (lat[:, 1] == 0) | (lat[:, 1] == 2 * n)
    interior = np.flatnonzero(~boundary)

    p = mesh.vertices[tris]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns e1, e2
    inv = np.linalg.inv(jac)  # rows: grad lambda1, grad lambda2
    grad_lambda = np.empty((len(tris), 3, 2))
    grad_lambda[:, 1] = inv[:, 0]
    grad_lambda[:, 2] = inv[:, 1]
    grad_lambda[:, 0] = -(inv[:, 0] + inv[:, 1])
    areas = 0.5 * np.abs(np.linalg.det(jac))

    for arr in (dof_coords, cell_dofs, interior, boundary, grad_lambda, areas):
        arr.setflags(write=False)
    return FunctionSpace(mesh, degree, dof_coords, cell_dofs, interior, boundary, grad_lambda, areas)


def eval_shape(space: FunctionSpace, triangle: int, ref_point) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, physical gradients and Laplacians of the local basis.

    ``ref_point`` is a barycentric coordinate triple on ``triangle``.
    """
    if not 0 <= triangle < space.mesh.n_triangles:
        raise IndexError(f"triangle index {triangle} out of range")
    lam = np.asarray(ref_point, dtype=float)
    if lam.shape != (3,) or np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError("ref_point must be a barycentric triple in the simplex")
    gl = space.grad_lambda[triangle]
    values = shape_values(space.degree, lam)
    grads = shape_bary_derivatives(space.degree, lam) @ gl
    H = shape_bary_hessians(space.degree)
    laps = np.einsum("ikl,kd,ld->i", H, gl, gl)
    return values, grads, laps


@dataclass(frozen=True)
class ElementData:
    """Basis data at quadrature points of every element."""

    rule: QuadratureRule
    values: np.ndarray  # (nq, nloc), identical on all elements
    grads: np.ndarray  # (nel, nq, nloc, 2)
    laps: np.ndarray  # (nel, nloc), constant per element
    jxw: np.ndarray  # (nel, nq) physical quadrature weights
    points: np.ndarray  # (nel, nq, 2) physical quadrature points


def element_data(space: FunctionSpace, degree: int) -> ElementData:
    rule = triangle_quadrature(degree)
    values = shape_values(space.degree, rule.points)
    dl = shape_bary_derivatives(space.degree, rule.points)  # (nq, nloc, 3)
    grads = np.einsum("qik,ekd->eqid", dl, space.grad_lambda)
    H = shape_bary_hessians(space.degree)
    laps = np.einsum("ikl,ekd,eld->ei", H, space.grad_lambda, space.grad_lambda)
    jxw = 2.0 * space.areas[:, None] * rule.weights[None, :]
    verts = space.mesh.vertices[space.mesh.triangles]  # (nel, 3, 2)
    points = np.einsum("qk,ekd->eqd", rule.points, verts)
    return ElementData(rule, values, grads, laps, jxw, points)
