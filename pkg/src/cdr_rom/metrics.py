"""Time-integrated relative best-fit errors of ROM trajectories."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .fom import Trajectory
from .pod import PODBasis


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class ErrorReport:
    err_l2: float
    err_h1: float
    formulation: str = ""
    R: int = 0
    tau: float = 0.0
    dt: float = 0.0
    tau_apg: float = 0.0
    status: Status = Status.CONVERGED

    @property
    def diverged(self) -> bool:
        return self.status is Status.DIVERGED


def _integer_ratio(a: float, b: float) -> int | None:
    r = a / b
    k = int(round(r))
    if k >= 1 and abs(r - k) <= 1e-9 * max(1.0, r):
        return k
    return None


def aligned_columns(rom_dt: float, rom_steps: int, truth_dt: float, truth_steps: int):
    """Indices ``(rom_cols, truth_cols)`` for n >= 1 on the coarser of the two time grids."""
    k = _integer_ratio(rom_dt, truth_dt)
    if k is not None:
        if rom_steps * k != truth_steps:
            raise ValueError(f"ROM horizon {rom_steps * rom_dt:g} differs from truth horizon {truth_steps * truth_dt:g}")
        n = np.arange(1, rom_steps + 1)
        return n, n * k
    k = _integer_ratio(truth_dt, rom_dt)
    if k is None:
        raise ValueError(f"time steps {rom_dt!r} and {truth_dt!r} are not integer multiples of each other")
    if truth_steps * k != rom_steps:
        raise ValueError(f"ROM horizon {rom_steps * rom_dt:g} differs from truth horizon {truth_steps * truth_dt:g}")
    m = np.arange(1, truth_steps + 1)
    return m * k, m


class _Norm:
    """Reduced Gram matrix and best-fit truth coordinates for one norm."""

    def __init__(self, Psi: np.ndarray, G, truth: np.ndarray):
        GPsi = G @ Psi
        Gr = Psi.T @ GPsi
        self.Gr = 0.5 * (Gr + Gr.T)
        try:
            cho = sla.cho_factor(self.Gr)
        except sla.LinAlgError as exc:
            raise ValueError("reduced Gram matrix is singular") from exc
        self.coeffs = sla.cho_solve(cho, GPsi.T @ truth)  # (R, n_truth_cols)
        self.sq = np.einsum("an,ab,bn->n", self.coeffs, self.Gr, self.coeffs)

    def ratio(self, Y: np.ndarray, truth_cols: np.ndarray) -> float:
        diff = Y - self.coeffs[:, truth_cols]
        num = np.einsum("an,ab,bn->", diff, self.Gr, diff)
        den = self.sq[truth_cols].sum()
        if den == 0.0:
            return 0.0 if num == 0.0 else float("inf")
        return float(num / den)


class ErrorEvaluator:
    """Reusable evaluator of the L2 and H1-semi-norm errors against one truth trajectory.

    Errors are ratios of time-summed squared norms (no square root),
    ``sum_n ||Psi y^n - Pi u^n||_G^2 / sum_n ||Pi u^n||_G^2``, with ``Pi``
    the G-orthogonal projector onto ``span(Psi)``.
    """

    def __init__(self, basis: PODBasis | np.ndarray, truth_coarse: Trajectory, M, D):
        Psi = basis.Psi if isinstance(basis, PODBasis) else np.asarray(basis, dtype=float)
        self.R = Psi.shape[1]
        self.truth_dt = truth_coarse.dt
        self.truth_steps = truth_coarse.n_steps
        self._l2 = _Norm(Psi, M, truth_coarse.states)
        self._h1 = _Norm(Psi, D, truth_coarse.states)

    def evaluate(self, rom: Trajectory, formulation: str = "", tau: float = 0.0,
                 tau_apg: float = 0.0) -> ErrorReport:
        rom_cols, truth_cols = aligned_columns(rom.dt, rom.n_steps, self.truth_dt, self.truth_steps)
        Y = rom.states[:, rom_cols]
        meta = dict(formulation=formulation, R=self.R, tau=tau, dt=rom.dt, tau_apg=tau_apg)
        if not np.isfinite(rom.states).all():
            return ErrorReport(float("inf"), float("inf"), status=Status.DIVERGED, **meta)
        with np.errstate(over="ignore", invalid="ignore"):
            e2 = self._l2.ratio(Y, truth_cols)
            e1 = self._h1.ratio(Y, truth_cols)
        if not (np.isfinite(e2) and np.isfinite(e1)):
            return ErrorReport(float("inf"), float("inf"), status=Status.DIVERGED, **meta)
        return ErrorReport(e2, e1, status=Status.CONVERGED, **meta)


def time_integrated_errors(rom_traj: Trajectory, basis: PODBasis, truth_coarse: Trajectory, M, D,
                           formulation: str = "", tau: float = 0.0, tau_apg: float = 0.0) -> ErrorReport:
    return ErrorEvaluator(basis, truth_coarse, M, D).evaluate(rom_traj, formulation, tau, tau_apg)
