"""Implicit Euler time marching of the FOM and L2 transfers between spaces."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import GALERKIN_QUADRATURE_DEGREE, AssembledOperators, _scatter
from .fem_space import FunctionSpace, element_data, shape_values
from .mesh import locate_points
from .snapio import read_snap, write_snap


class SingularSystemError(RuntimeError):
    """The implicit Euler system matrix could not be factorized."""


@dataclass(frozen=True)
class Trajectory:
    """States ``a^0 .. a^Nt`` as columns, uniformly spaced by ``dt``."""

    dt: float
    states: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.states.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.states.shape[1])

    @property
    def T(self) -> float:
        return self.dt * self.n_steps

    def save(self, path: str | os.PathLike) -> None:
        write_snap(path, self.states, self.dt)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Trajectory":
        states, dt = read_snap(path)
        return cls(dt, states)


def factorize(matrix: sp.spmatrix):
    """Sparse LU of ``matrix``; raises :class:`SingularSystemError` when singular."""
    try:
        lu = spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc
    diag = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(diag)) or diag.min() <= 1e-300:
        raise SingularSystemError("system matrix is singular")
    return lu


def solve_fom(ops: AssembledOperators, dt: float, n_steps: int, a0: np.ndarray) -> Trajectory:
    """March ``(M/dt + B + Q) a^n = f + f_S + (M + M_S)/dt a^{n-1}``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    lhs = (ops.M / dt + ops.dynamics(dt)).tocsc()
    lu = factorize(lhs)
    lag = (ops.lagged_mass() / dt).tocsr()
    rhs0 = ops.total_forcing()
    states = np.empty((ops.n, n_steps + 1))
    states[:, 0] = a0
    for k in range(1, n_steps + 1):
        states[:, k] = lu.solve(rhs0 + lag @ states[:, k - 1])
    return Trajectory(float(dt), states)


def step_residuals(ops: AssembledOperators, traj: Trajectory) -> np.ndarray:
    """Norm of the discrete residual of every step of ``traj``."""
    dt = traj.dt
    a = traj.states
    r = (ops.M @ (a[:, 1:] - a[:, :-1])) / dt + ops.dynamics(dt) @ a[:, 1:] \
        - ops.total_forcing()[:, None] - (ops.M_S @ a[:, :-1]) / dt
    return np.linalg.norm(r, axis=0)


def mass_matrix(space: FunctionSpace) -> sp.csr_matrix:
    ed = element_data(space, GALERKIN_QUADRATURE_DEGREE)
    return _scatter(space, np.einsum("eq,qi,qj->eij", ed.jxw, ed.values, ed.values))


def load_vector(space: FunctionSpace, func, degree: int = 6) -> np.ndarray:
    """``(v_i, func)`` on interior dofs with a rule of the given degree."""
    ed = element_data(space, degree)
    fq = np.broadcast_to(np.asarray(func(ed.points[..., 0], ed.points[..., 1]), dtype=float),
                         ed.jxw.shape)
    local = np.einsum("eq,qi,eq->ei", ed.jxw, ed.values, fq)
    full = np.zeros(space.n_dofs_total)
    np.add.at(full, space.cell_dof_map.ravel(), local.ravel())
    return full[space.interior_dofs]


def project_initial_condition(space: FunctionSpace, u0, M: sp.spmatrix | None = None) -> np.ndarray:
    """L2 projection of ``u0`` onto the space (interior coefficients)."""
    if u0 is None:
        return np.zeros(space.n_interior)
    M = mass_matrix(space) if M is None else M
    rhs = load_vector(space, u0)
    if not np.any(rhs):
        return np.zeros(space.n_interior)
    return factorize(M).solve(rhs)


def _check_nested(fine: FunctionSpace, coarse: FunctionSpace) -> int:
    nf, nc = fine.mesh.n_per_side, coarse.mesh.n_per_side
    if nf % nc != 0:
        raise ValueError(f"meshes are not nested: fine n={nf} is not a multiple of coarse n={nc}")
    return nf // nc


def transfer_matrix(fine: FunctionSpace, coarse: FunctionSpace) -> sp.csr_matrix:
    """``T_ij = int v_i^coarse v_j^fine`` on interior dofs, integrated on the fine mesh."""
    _check_nested(fine, coarse)
    ed = element_data(fine, fine.degree + coarse.degree)
    tri_c, _ = locate_points(coarse.mesh, fine.mesh.centroids())
    # coarse barycentrics of fine quadrature points, relative to the owning coarse triangle
    verts = coarse.mesh.vertices[coarse.mesh.triangles[tri_c]]  # (nel_f, 3, 2)
    gl = coarse.grad_lambda[tri_c]  # (nel_f, 3, 2)
    rel = ed.points - verts[:, None, 0, :]
    lam12 = np.einsum("eqd,ekd->eqk", rel, gl[:, 1:, :])
    lam = np.concatenate([1.0 - lam12.sum(axis=2, keepdims=True), lam12], axis=2)
    vc = shape_values(coarse.degree, lam)  # (nel_f, nq, nloc_c)
    local = np.einsum("eq,eqi,qj->eij", ed.jxw, vc, ed.values)
    rows = np.repeat(coarse.cell_dof_map[tri_c], fine.n_local, axis=1).ravel()
    cols = np.tile(fine.cell_dof_map, (1, coarse.n_local)).ravel()
    T = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(coarse.n_dofs_total, fine.n_dofs_total)).tocsr()
    T.sum_duplicates()
    return T[coarse.interior_dofs][:, fine.interior_dofs].tocsr()


def restrict_to_coarse(fine_space: FunctionSpace, fine_coeffs: np.ndarray, coarse_space: FunctionSpace,
                       M_coarse: sp.spmatrix | None = None) -> np.ndarray:
    """L2 projection of a fine-space function (or columns of them) onto the coarse space."""
    T = transfer_matrix(fine_space, coarse_space)
    M = mass_matrix(coarse_space) if M_coarse is None else M_coarse
    rhs = T @ np.asarray(fine_coeffs, dtype=float)
    lu = factorize(M)
    if rhs.ndim == 1:
        return lu.solve(rhs)
    return np.column_stack([lu.solve(np.ascontiguousarray(rhs[:, k])) for k in range(rhs.shape[1])])


def restrict_trajectory(fine_space: FunctionSpace, traj: Trajectory, coarse_space: FunctionSpace) -> Trajectory:
    return Trajectory(traj.dt, restrict_to_coarse(fine_space, traj.states, coarse_space))


def prolong(coarse_space: FunctionSpace, coarse_coeffs: np.ndarray, fine_space: FunctionSpace) -> np.ndarray:
    """Interpolate a coarse function at the fine dofs (exact for nested P_k spaces)."""
    _check_nested(fine_space, coarse_space)
    full = coarse_space.embed(coarse_coeffs)
    return coarse_space.evaluate(full, fine_space.dof_coords[fine_space.interior_dofs])
