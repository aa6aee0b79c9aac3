"""Sparse operators of the Galerkin and residual-stabilized CDR systems.

Every stabilized operator is a combination of element-wise pairings of three
basis "channels": the value ``v``, the convective derivative ``b . grad v``
and the Laplacian ``lap v``. The strong operator is
``L v = -eps lap v + b . grad v + sigma v`` and its adjoint
``L* v = -eps lap v - b . grad v + sigma v``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fem_space import ElementData, FunctionSpace, element_data

CHANNELS = ("value", "conv", "lap")

GALERKIN_QUADRATURE_DEGREE = 4
STABILIZATION_QUADRATURE_DEGREE = 6


class StabilizationKind(str, enum.Enum):
    NONE = "none"
    SUPG = "supg"
    GLS_DS = "gls_ds"
    ADJ_DS = "adj_ds"
    GLS_ST = "gls_st"
    ADJ_ST = "adj_st"

    @property
    def is_discretize_then_stabilize(self) -> bool:
        return self in (StabilizationKind.GLS_DS, StabilizationKind.ADJ_DS)


@dataclass(frozen=True)
class CDRProblem:
    """``u_t - eps lap u + b . grad u + sigma u = f`` on the unit square, u = 0 on the boundary."""

    epsilon: float
    b: tuple[float, float]
    sigma: float
    forcing: Callable[[np.ndarray, np.ndarray], np.ndarray]
    T: float
    u0: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if not self.T > 0:
            raise ValueError("final time T must be positive")
        object.__setattr__(self, "b", (float(self.b[0]), float(self.b[1])))

    @property
    def b_norm(self) -> float:
        return float(np.hypot(*self.b))

    def strong_coeffs(self) -> np.ndarray:
        """Channel coefficients of ``L``."""
        return np.array([self.sigma, 1.0, -self.epsilon])

    def adjoint_coeffs(self) -> np.ndarray:
        """Channel coefficients of ``L*``."""
        return np.array([self.sigma, -1.0, -self.epsilon])


def grid_peclet(b_norm: float, h: float, epsilon: float) -> float:
    """Grid Peclet number ``|b| h / eps``; use ``h = 1 / (n p)``."""
    if not h > 0 or not epsilon > 0:
        raise ValueError("h and epsilon must be positive")
    return b_norm * h / epsilon


def test_operator_coeffs(kind: StabilizationKind, problem: CDRProblem, dt: float) -> np.ndarray:
    """Channel coefficients of the stabilization test operator for ``kind``."""
    kind = StabilizationKind(kind)
    L = problem.strong_coeffs()
    Ls = problem.adjoint_coeffs()
    time = np.array([1.0 / dt, 0.0, 0.0])
    if kind is StabilizationKind.SUPG:
        return np.array([0.0, 1.0, 0.0])
    if kind is StabilizationKind.GLS_DS:
        return time + L
    if kind is StabilizationKind.ADJ_DS:
        return -time - Ls
    if kind is StabilizationKind.GLS_ST:
        return L
    if kind is StabilizationKind.ADJ_ST:
        return -Ls
    raise ValueError("no stabilization operator for kind 'none'")


# low-level assembly ------------------------------------------------------------

def _scatter(space: FunctionSpace, local: np.ndarray) -> sp.csr_matrix:
    """Sum element matrices into a CSR matrix restricted to interior dofs."""
    dofs = space.cell_dof_map
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.n_dofs_total
    full = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    full.sum_duplicates()
    inner = space.interior_dofs
    out = full[inner][:, inner].tocsr()
    out.sort_indices()
    return out


def _scatter_full(space: FunctionSpace, local: np.ndarray) -> sp.csr_matrix:
    dofs = space.cell_dof_map
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.n_dofs_total
    full = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    full.sum_duplicates()
    return full


def _scatter_vector(space: FunctionSpace, local: np.ndarray) -> np.ndarray:
    full = np.zeros(space.n_dofs_total)
    np.add.at(full, space.cell_dof_map.ravel(), local.ravel())
    return full[space.interior_dofs]


def _channels(ed: ElementData, b: tuple[float, float]) -> np.ndarray:
    """Channel values at quadrature points, shape ``(3, nel, nq, nloc)``."""
    nel = ed.grads.shape[0]
    val = np.broadcast_to(ed.values, (nel,) + ed.values.shape)
    conv = ed.grads[..., 0] * b[0] + ed.grads[..., 1] * b[1]
    lap = np.broadcast_to(ed.laps[:, None, :], conv.shape)
    return np.stack([val, conv, lap])


def _forcing_at(ed: ElementData, forcing) -> np.ndarray:
    pts = ed.points
    fq = np.asarray(forcing(pts[..., 0], pts[..., 1]), dtype=float)
    return np.broadcast_to(fq, pts.shape[:2])


def galerkin_element_matrices(space: FunctionSpace, problem: CDRProblem):
    """Element-level mass, diffusion, convection and load (used by assembly and tests)."""
    ed = element_data(space, GALERKIN_QUADRATURE_DEGREE)
    w = ed.jxw
    v = ed.values
    Me = np.einsum("eq,qi,qj->eij", w, v, v)
    De = np.einsum("eq,eqid,eqjd->eij", w, ed.grads, ed.grads)
    conv = ed.grads[..., 0] * problem.b[0] + ed.grads[..., 1] * problem.b[1]
    Ae = np.einsum("eq,qi,eqj->eij", w, v, conv)
    fe = np.einsum("eq,qi,eq->ei", w, v, _forcing_at(ed, problem.forcing))
    return Me, De, Ae, fe


# operator bundles --------------------------------------------------------------

@dataclass(frozen=True)
class StabilizationPieces:
    """Element-wise channel pairings ``P[X, Y]_ij = sum_K int_K X(v_i) Y(v_j)``
    and loads ``F[X]_i = sum_K int_K X(v_i) f`` on interior dofs."""

    pairs: tuple  # 3x3 nested tuple of csr matrices
    loads: np.ndarray  # (3, n_interior)

    def combine(self, test: np.ndarray, trial: np.ndarray) -> sp.csr_matrix:
        out = None
        for x in range(3):
            for y in range(3):
                c = test[x] * trial[y]
                if c == 0.0:
                    continue
                term = c * self.pairs[x][y]
                out = term if out is None else out + term
        n = self.loads.shape[1]
        return sp.csr_matrix((n, n)) if out is None else out.tocsr()

    def load(self, test: np.ndarray) -> np.ndarray:
        return test @ self.loads


def assemble_pieces(space: FunctionSpace, problem: CDRProblem) -> StabilizationPieces:
    ed = element_data(space, STABILIZATION_QUADRATURE_DEGREE)
    ch = _channels(ed, problem.b)
    w = ed.jxw
    pairs = tuple(
        tuple(_scatter(space, np.einsum("eq,eqi,eqj->eij", w, ch[x], ch[y])) for y in range(3))
        for x in range(3)
    )
    fq = _forcing_at(ed, problem.forcing)
    loads = np.stack([_scatter_vector(space, np.einsum("eq,eqi,eq->ei", w, ch[x], fq)) for x in range(3)])
    return StabilizationPieces(pairs, loads)


@dataclass(frozen=True)
class AssembledOperators:
    """FOM operators on interior dofs.

    ``Q`` contains the ``v_j / dt`` part of the residual in its right slot; it
    is stored as ``Q_static + M_S / dt`` so space-time kinds and SUPG can be
    re-used at any time step. Discretize-then-stabilize kinds are tied to the
    ``dt`` they were assembled with.
    """

    M: sp.csr_matrix
    D: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    f: np.ndarray
    kind: StabilizationKind = StabilizationKind.NONE
    tau: float = 0.0
    dt: float | None = None
    Q_static: sp.csr_matrix | None = None
    M_S: sp.csr_matrix | None = None
    f_S: np.ndarray | None = None
    space: FunctionSpace | None = field(default=None, repr=False, compare=False)
    problem: CDRProblem | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = self.M.shape[0]
        if self.M_S is None:
            object.__setattr__(self, "M_S", sp.csr_matrix((n, n)))
        if self.Q_static is None:
            object.__setattr__(self, "Q_static", sp.csr_matrix((n, n)))
        if self.f_S is None:
            object.__setattr__(self, "f_S", np.zeros(n))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def stabilized(self) -> bool:
        return self.kind is not StabilizationKind.NONE

    def check_dt(self, dt: float) -> None:
        if self.kind.is_discretize_then_stabilize and not np.isclose(dt, self.dt, rtol=1e-12, atol=0.0):
            raise ValueError(
                f"{self.kind.value} operators were assembled for dt={self.dt!r}; "
                f"reassemble for dt={dt!r}"
            )

    def Q_at(self, dt: float) -> sp.csr_matrix:
        self.check_dt(dt)
        if not self.stabilized:
            return self.Q_static
        return (self.Q_static + self.M_S / dt).tocsr()

    @property
    def Q(self) -> sp.csr_matrix:
        if not self.stabilized:
            return self.Q_static
        return self.Q_at(self.dt)

    def dynamics(self, dt: float) -> sp.csr_matrix:
        """``B + Q`` at time step ``dt``."""
        return (self.B + self.Q_at(dt)).tocsr() if self.stabilized else self.B

    def lagged_mass(self) -> sp.csr_matrix:
        """``M + M_S``, the coefficient of the previous state (times 1/dt)."""
        return (self.M + self.M_S).tocsr()

    def total_forcing(self) -> np.ndarray:
        return self.f + self.f_S


def assemble_galerkin(space: FunctionSpace, problem: CDRProblem) -> AssembledOperators:
    Me, De, Ae, fe = galerkin_element_matrices(space, problem)
    M = _scatter(space, Me)
    D = _scatter(space, De)
    A = _scatter(space, Ae)
    B = (A + problem.epsilon * D + problem.sigma * M).tocsr()
    f = _scatter_vector(space, fe)
    return AssembledOperators(M, D, A, B, f, space=space, problem=problem)


def assemble_unrestricted(space: FunctionSpace, problem: CDRProblem):
    """Mass, diffusion and convection matrices over all dofs, boundary included."""
    Me, De, Ae, _ = galerkin_element_matrices(space, problem)
    return _scatter_full(space, Me), _scatter_full(space, De), _scatter_full(space, Ae)


def stabilization_from_pieces(pieces: StabilizationPieces, problem: CDRProblem,
                              kind: StabilizationKind, tau: float, dt: float):
    """``(Q_static, M_S, f_S)`` with ``Q = Q_static + M_S / dt``."""
    kind = StabilizationKind(kind)
    if kind is StabilizationKind.NONE:
        raise ValueError("kind 'none' has no stabilization operators")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    test = tau * test_operator_coeffs(kind, problem, dt)
    Q_static = pieces.combine(test, problem.strong_coeffs())
    M_S = pieces.combine(test, np.array([1.0, 0.0, 0.0]))
    f_S = pieces.load(test)
    return Q_static, M_S, f_S


def assemble_stabilization(space: FunctionSpace, problem: CDRProblem, kind: StabilizationKind,
                           tau: float, dt: float):
    """Assemble ``(Q, M_S, f_S)`` for one stabilization kind at ``(tau, dt)``."""
    pieces = assemble_pieces(space, problem)
    Q_static, M_S, f_S = stabilization_from_pieces(pieces, problem, kind, tau, dt)
    return (Q_static + M_S / dt).tocsr(), M_S, f_S


class Discretization:
    """A space/problem pair with cached Galerkin operators and stabilization pieces."""

    def __init__(self, space: FunctionSpace, problem: CDRProblem):
        self.space = space
        self.problem = problem
        self._galerkin: AssembledOperators | None = None
        self._pieces: StabilizationPieces | None = None

    @property
    def galerkin(self) -> AssembledOperators:
        if self._galerkin is None:
            self._galerkin = assemble_galerkin(self.space, self.problem)
        return self._galerkin

    @property
    def pieces(self) -> StabilizationPieces:
        if self._pieces is None:
            self._pieces = assemble_pieces(self.space, self.problem)
        return self._pieces

    def operators(self, kind: StabilizationKind = StabilizationKind.NONE, tau: float = 0.0,
                  dt: float | None = None) -> AssembledOperators:
        kind = StabilizationKind(kind)
        g = self.galerkin
        if kind is StabilizationKind.NONE:
            return g
        Q_static, M_S, f_S = stabilization_from_pieces(self.pieces, self.problem, kind, tau, dt)
        return AssembledOperators(g.M, g.D, g.A, g.B, g.f, kind, float(tau), float(dt),
                                  Q_static, M_S, f_S, space=self.space, problem=self.problem)
