"""Least-squares and adjoint Petrov-Galerkin ROMs on Galerkin or stabilized FOMs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import AssembledOperators, StabilizationKind
from .pod import PODBasis
from .rom_core import (
    InnerProduct,
    MassSolver,
    ReducedOperators,
    _check_basis,
    _resolve_dt,
    petrov_galerkin_reduce,
)

APG_BASE_KINDS = (
    StabilizationKind.NONE,
    StabilizationKind.SUPG,
    StabilizationKind.GLS_ST,
    StabilizationKind.ADJ_ST,
)


def _prefix(kind: StabilizationKind) -> str:
    return "g" if kind is StabilizationKind.NONE else kind.value


@dataclass(frozen=True)
class LSPGConfig:
    base_kind: StabilizationKind = StabilizationKind.NONE
    W: InnerProduct = InnerProduct.INVERSE_MASS
    tau: float = 0.0
    dt: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "base_kind", StabilizationKind(self.base_kind))
        object.__setattr__(self, "W", InnerProduct(self.W))
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class APGConfig:
    base_kind: StabilizationKind = StabilizationKind.NONE
    tau_apg: float = 0.0
    tau: float = 0.0
    dt: float = 1e-3

    def __post_init__(self):
        kind = StabilizationKind(self.base_kind)
        if kind not in APG_BASE_KINDS:
            raise ValueError(f"APG is not defined on the {kind.value} FOM; use none, supg, gls_st or adj_st")
        if self.tau_apg < 0:
            raise ValueError("tau_apg must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "base_kind", kind)


def _check_kind(ops: AssembledOperators, kind: StabilizationKind, tau: float) -> None:
    if ops.kind is not kind:
        raise ValueError(f"operators are {ops.kind.value!r} but the configuration asks for {kind.value!r}")
    if ops.stabilized and not np.isclose(ops.tau, tau, rtol=1e-14, atol=0.0):
        raise ValueError(f"operators were assembled with tau={ops.tau!r}, configuration has {tau!r}")


def residual_jacobian_times(ops: AssembledOperators, Psi: np.ndarray, dt: float) -> np.ndarray:
    """``J Psi`` with ``J = M/dt + B + Q``."""
    return (ops.M @ Psi) / dt + ops.dynamics(dt) @ Psi


def lspg_reduce(ops: AssembledOperators, basis: PODBasis, cfg: LSPGConfig,
                mass_solver: MassSolver | None = None) -> ReducedOperators:
    """Normal equations of the per-step W-weighted residual minimization.

    The test basis is ``W' J Psi``; the combined reduced matrix
    ``E/dt + G`` equals ``(J Psi)^T W' (J Psi)``.
    """
    Psi = basis.Psi
    _check_basis(ops, Psi)
    _check_kind(ops, cfg.base_kind, cfg.tau)
    dt = _resolve_dt(ops, cfg.dt)
    JPsi = residual_jacobian_times(ops, Psi, dt)
    if cfg.W is InnerProduct.IDENTITY:
        Phi = JPsi
    else:
        Phi = (mass_solver or MassSolver(ops.M)).solve(JPsi)
    gram = JPsi.T @ Phi
    if np.linalg.matrix_rank(gram) < Psi.shape[1]:
        raise ValueError("J Psi is rank deficient; the least-squares step has no unique minimizer")
    return petrov_galerkin_reduce(ops, Psi, Phi, dt, f"{_prefix(cfg.base_kind)}-lspg")


def apg_test_basis(basis: PODBasis, dyn, tau_apg: float, M, mass_solver: MassSolver | None = None) -> np.ndarray:
    """``Psi - tau_apg (M^{-1} - Psi Psi^T) dyn^T Psi``."""
    Psi = basis.Psi if isinstance(basis, PODBasis) else np.asarray(basis, dtype=float)
    if tau_apg == 0:
        return Psi.copy()
    X = dyn.T @ Psi
    fine = (mass_solver or MassSolver(M)).solve(X) - Psi @ (Psi.T @ X)
    return Psi - tau_apg * fine


def apg_reduce(ops: AssembledOperators, basis: PODBasis, cfg: APGConfig,
               mass_solver: MassSolver | None = None) -> ReducedOperators:
    """APG ROM; the test basis acts on the full (possibly stabilized) FOM OΔE."""
    Psi = basis.Psi
    _check_basis(ops, Psi)
    _check_kind(ops, cfg.base_kind, cfg.tau)
    dt = _resolve_dt(ops, cfg.dt)
    dyn = ops.dynamics(dt) if ops.stabilized else ops.B
    Phi = apg_test_basis(Psi, dyn, cfg.tau_apg, ops.M, mass_solver)
    return petrov_galerkin_reduce(ops, Psi, Phi, dt, f"{_prefix(cfg.base_kind)}-apg", tau_apg=cfg.tau_apg)


def lspg_stability_matrix(ops: AssembledOperators, Psi: np.ndarray, dt: float,
                          mass_solver: MassSolver | None = None) -> np.ndarray:
    """``Psi^T (B + B^T) Psi + dt Psi^T B^T M^{-1} B Psi`` for the Galerkin FOM."""
    BPsi = ops.B @ Psi
    MinvBPsi = (mass_solver or MassSolver(ops.M)).solve(BPsi)
    return Psi.T @ (BPsi + ops.B.T @ Psi) + dt * BPsi.T @ MinvBPsi
