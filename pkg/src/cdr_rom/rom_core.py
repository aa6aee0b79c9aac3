"""Continuous-projection and discrete Galerkin ROMs as reduced OΔE systems.

Every reduced model here has the form

    E (y^n - y^{n-1}) / dt + G y^n = g + (E_lag - E) y^{n-1} / dt,

i.e. ``(E/dt + G) y^n = g + E_lag y^{n-1} / dt``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .assembly import (
    GALERKIN_QUADRATURE_DEGREE,
    STABILIZATION_QUADRATURE_DEGREE,
    AssembledOperators,
    CDRProblem,
    StabilizationKind,
    _forcing_at,
    test_operator_coeffs,
)
from .fem_space import FunctionSpace, element_data
from .fom import SingularSystemError, Trajectory, factorize
from .pod import PODBasis

MAX_ROM_DIMENSION = 200


class InnerProduct(str, enum.Enum):
    """Discrete inner-product weight ``W`` for discrete projections."""

    IDENTITY = "identity"
    INVERSE_MASS = "inverse_mass"


@dataclass(frozen=True)
class ReducedOperators:
    E: np.ndarray
    G: np.ndarray
    g: np.ndarray
    E_lag: np.ndarray
    formulation: str = "galerkin"
    tau: float = 0.0
    dt: float | None = None
    tau_apg: float = 0.0

    def __post_init__(self):
        R = self.E.shape[0]
        if self.E.shape != (R, R) or self.G.shape != (R, R) or self.E_lag.shape != (R, R) \
                or self.g.shape != (R,):
            raise ValueError("reduced operator blocks have inconsistent dimensions")

    @property
    def R(self) -> int:
        return self.E.shape[0]

    def system_matrix(self, dt: float) -> np.ndarray:
        return self.E / dt + self.G


class MassSolver:
    """Reusable sparse LU of the mass matrix, applied column-wise."""

    def __init__(self, M):
        self._lu = factorize(M)

    def solve(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self._lu.solve(X)
        return np.column_stack([self._lu.solve(np.ascontiguousarray(X[:, k])) for k in range(X.shape[1])])


def _check_basis(ops: AssembledOperators, Psi: np.ndarray) -> None:
    if Psi.ndim != 2 or Psi.shape[0] != ops.n:
        raise ValueError(f"basis has {Psi.shape[0]} rows but the FOM has {ops.n} unknowns")
    if not 1 <= Psi.shape[1] <= MAX_ROM_DIMENSION:
        raise ValueError(f"ROM dimension must lie in [1, {MAX_ROM_DIMENSION}]")


def _resolve_dt(ops: AssembledOperators, dt: float | None) -> float | None:
    dt = ops.dt if dt is None else float(dt)
    if ops.stabilized:
        if dt is None:
            raise ValueError("stabilized reductions need a time step")
        ops.check_dt(dt)
    return dt


def petrov_galerkin_reduce(ops: AssembledOperators, Psi: np.ndarray, Phi: np.ndarray, dt: float | None,
                           formulation: str, tau_apg: float = 0.0) -> ReducedOperators:
    """Test the FOM OΔE with the columns of ``Phi`` for trial basis ``Psi``."""
    MPsi = ops.M @ Psi
    if ops.stabilized:
        dyn_psi = ops.dynamics(dt) @ Psi
        lag_psi = MPsi + ops.M_S @ Psi
    else:
        dyn_psi = ops.B @ Psi
        lag_psi = MPsi
    return ReducedOperators(
        E=Phi.T @ MPsi,
        G=Phi.T @ dyn_psi,
        g=Phi.T @ ops.total_forcing(),
        E_lag=Phi.T @ lag_psi,
        formulation=formulation,
        tau=ops.tau,
        dt=dt,
        tau_apg=tau_apg,
    )


def reduce_discrete_galerkin(ops: AssembledOperators, basis: PODBasis,
                             W: InnerProduct | str = InnerProduct.IDENTITY, dt: float | None = None,
                             mass_solver: MassSolver | None = None) -> ReducedOperators:
    """Make the FOM residual W-orthogonal to ``span(Psi)``."""
    Psi = basis.Psi
    _check_basis(ops, Psi)
    dt = _resolve_dt(ops, dt)
    W = InnerProduct(W)
    if W is InnerProduct.IDENTITY:
        Phi = Psi
    else:
        Phi = (mass_solver or MassSolver(ops.M)).solve(Psi)
    name = "galerkin" if not ops.stabilized else ops.kind.value
    return petrov_galerkin_reduce(ops, Psi, Phi, dt, f"{name}-discrete")


# continuous projection -----------------------------------------------------------

class ContinuousReducer:
    """Reduced forms obtained by integrating the ROM basis functions ``phi = v Psi``.

    The Galerkin blocks and the nine channel pairings of the stabilization
    are computed once; :meth:`reduce` combines them for any kind, tau and dt.
    """

    def __init__(self, space: FunctionSpace, problem: CDRProblem, Psi: np.ndarray):
        if Psi.shape[0] != space.n_interior:
            raise ValueError(f"basis has {Psi.shape[0]} rows but the space has {space.n_interior} interior dofs")
        self.problem = problem
        self.R = Psi.shape[1]
        b = problem.b

        ed, val, grad = self._rom_functions(space, Psi, GALERKIN_QUADRATURE_DEGREE)
        w = ed.jxw
        conv = grad @ np.asarray(b)
        self.M = np.einsum("eq,eqa,eqb->ab", w, val, val)
        self.D = np.einsum("eq,eqad,eqbd->ab", w, grad, grad)
        self.A = np.einsum("eq,eqa,eqb->ab", w, val, conv)
        self.f = np.einsum("eq,eqa,eq->a", w, val, _forcing_at(ed, problem.forcing))
        self.B = self.A + problem.epsilon * self.D + problem.sigma * self.M

        ed, val, grad = self._rom_functions(space, Psi, STABILIZATION_QUADRATURE_DEGREE)
        full = space.embed(Psi)[space.cell_dof_map]  # (nel, nloc, R)
        lap = np.einsum("ei,eia->ea", ed.laps, full)
        ch = np.stack([val, grad @ np.asarray(b), np.broadcast_to(lap[:, None, :], val.shape)])
        w = ed.jxw
        self.pairs = np.einsum("eq,xeqa,yeqb->xyab", w, ch, ch)
        self.loads = np.einsum("eq,xeqa,eq->xa", w, ch, _forcing_at(ed, problem.forcing))

    @staticmethod
    def _rom_functions(space: FunctionSpace, Psi: np.ndarray, degree: int):
        ed = element_data(space, degree)
        local = space.embed(Psi)[space.cell_dof_map]  # (nel, nloc, R)
        val = np.einsum("qi,eia->eqa", ed.values, local)
        grad = np.einsum("eqid,eia->eqad", ed.grads, local)
        return ed, val, grad

    def stabilization(self, kind: StabilizationKind, tau: float, dt: float):
        """Reduced ``(Q_static, M_S, f_S)``."""
        test = tau * test_operator_coeffs(kind, self.problem, dt)
        trial = self.problem.strong_coeffs()
        Q_static = np.einsum("x,y,xyab->ab", test, trial, self.pairs)
        M_S = np.einsum("x,xab->ab", test, self.pairs[:, 0])
        f_S = test @ self.loads
        return Q_static, M_S, f_S

    def reduce(self, kind: StabilizationKind | str = StabilizationKind.NONE, tau: float = 0.0,
               dt: float | None = None) -> ReducedOperators:
        kind = StabilizationKind(kind)
        if kind is StabilizationKind.NONE:
            return ReducedOperators(self.M.copy(), self.B.copy(), self.f.copy(), self.M.copy(),
                                    "galerkin", 0.0, dt)
        if dt is None or not dt > 0:
            raise ValueError("stabilized reductions need a positive time step")
        if tau < 0:
            raise ValueError("tau must be non-negative")
        Q_static, M_S, f_S = self.stabilization(kind, tau, dt)
        return ReducedOperators(
            E=self.M.copy(),
            G=self.B + Q_static + M_S / dt,
            g=self.f + f_S,
            E_lag=self.M + M_S,
            formulation=kind.value,
            tau=float(tau),
            dt=float(dt),
        )


def reduce_continuous(ops: AssembledOperators, basis: PODBasis, dt: float | None = None) -> ReducedOperators:
    """Continuous Galerkin or stabilized ROM matching the kind, tau and dt of ``ops``."""
    if ops.space is None or ops.problem is None:
        raise ValueError("continuous reduction needs operators that carry their space and problem")
    _check_basis(ops, basis.Psi)
    dt = _resolve_dt(ops, dt)
    return ContinuousReducer(ops.space, ops.problem, basis.Psi).reduce(ops.kind, ops.tau, dt)


# time marching ---------------------------------------------------------------------

def reduced_initial_condition(basis: PODBasis, M, a0: np.ndarray) -> np.ndarray:
    """``y^0 = Psi^T M a^0``, the M-orthogonal projection for an M-orthonormal basis."""
    return basis.Psi.T @ (M @ np.asarray(a0, dtype=float))


def solve_rom(red: ReducedOperators, dt: float, n_steps: int, y0: np.ndarray) -> Trajectory:
    """March ``(E/dt + G) y^n = g + E_lag y^{n-1} / dt``.

    The system is factorized once and turned into the affine map
    ``y^n = P y^{n-1} + c``. A non-finite state stops the march and the
    remaining states are filled with NaN.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if red.dt is not None and not np.isclose(dt, red.dt, rtol=1e-12, atol=0.0):
        raise ValueError(f"reduced operators were built for dt={red.dt!r}, not {dt!r}")
    K = red.system_matrix(dt)
    with np.errstate(all="ignore"):
        if not np.all(np.isfinite(K)):
            raise SingularSystemError("reduced system matrix is not finite")
        lu, piv = sla.lu_factor(K, check_finite=False)
        if np.min(np.abs(np.diag(lu))) <= np.finfo(float).tiny:
            raise SingularSystemError("reduced system matrix is singular")
        P = sla.lu_solve((lu, piv), red.E_lag / dt, check_finite=False)
        c = sla.lu_solve((lu, piv), red.g, check_finite=False)

    states = np.empty((red.R, n_steps + 1))
    states[:, 0] = y0
    y = states[:, 0].copy()
    with np.errstate(all="ignore"):
        for k in range(1, n_steps + 1):
            y = P @ y + c
            states[:, k] = y
            if not np.isfinite(y).all():
                states[:, k:] = np.nan
                break
    return Trajectory(float(dt), states)
