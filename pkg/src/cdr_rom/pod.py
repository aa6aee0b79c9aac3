"""Weighted proper orthogonal decomposition via the snapshot Gram matrix."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .fom import Trajectory
from .snapio import read_snap, write_snap

MAX_SNAPSHOTS = 2000
EIGENVALUE_CLAMP = 1e-14


@dataclass(frozen=True)
class SnapshotMatrix:
    """Snapshot columns ordered by time, taken every ``stride`` steps of the source."""

    S: np.ndarray
    source_dt: float = 0.0
    stride: int = 1

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        if S.ndim != 2 or S.shape[1] < 1:
            raise ValueError("snapshot matrix needs at least one column")
        object.__setattr__(self, "S", S)

    @property
    def n_snapshots(self) -> int:
        return self.S.shape[1]


def snapshots_from_trajectory(traj: Trajectory, max_snapshots: int = MAX_SNAPSHOTS) -> SnapshotMatrix:
    """All states including ``a^0``, subsampled so at most ``max_snapshots`` remain."""
    n_cols = traj.states.shape[1]
    stride = max(1, -(-n_cols // max_snapshots))
    return SnapshotMatrix(traj.states[:, ::stride], traj.dt, stride)


@dataclass(frozen=True)
class PODBasis:
    """P-orthonormal basis ``Psi`` (N x R) and the full Gram spectrum."""

    Psi: np.ndarray
    eigenvalues: np.ndarray
    weighting: str = "mass"

    @property
    def R(self) -> int:
        return self.Psi.shape[1]

    @property
    def N(self) -> int:
        return self.Psi.shape[0]

    @property
    def numerical_rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues > 0))

    def truncate(self, R: int) -> "PODBasis":
        if not 1 <= R <= self.R:
            raise ValueError(f"cannot truncate a rank-{self.R} basis to R={R}")
        return PODBasis(self.Psi[:, :R], self.eigenvalues, self.weighting)

    def save(self, basis_path: str | os.PathLike, eigen_path: str | os.PathLike, dt: float = 0.0) -> None:
        write_snap(basis_path, self.Psi, dt)
        write_snap(eigen_path, self.eigenvalues[:, None], dt)

    @classmethod
    def load(cls, basis_path, eigen_path, weighting: str = "mass") -> "PODBasis":
        Psi, _ = read_snap(basis_path)
        lam, _ = read_snap(eigen_path)
        return cls(Psi, lam[:, 0], weighting)


def _gram(S: np.ndarray, P) -> np.ndarray:
    PS = S if P is None else P @ S
    K = S.T @ PS
    return 0.5 * (K + K.T)


def _fix_signs(Psi: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(Psi), axis=0)
    signs = np.sign(Psi[idx, np.arange(Psi.shape[1])])
    signs[signs == 0] = 1.0
    return Psi * signs


def compute_pod(snapshots, P=None, *, energy: float | None = None, rank: int | None = None,
                weighting: str | None = None) -> PODBasis:
    """POD basis of ``snapshots`` in the inner product ``<x, y> = x^T P y``.

    Parameters
    ----------
    snapshots : SnapshotMatrix or ndarray
        Columns are the snapshots.
    P : sparse or dense SPD matrix, optional
        Weighting matrix; ``None`` means the identity.
    energy : float in (0, 1], optional
        Keep the smallest rank whose cumulative eigenvalue share reaches
        ``energy``.
    rank : int, optional
        Explicit rank. Mutually exclusive with ``energy``. When neither is
        given the numerical rank is kept.
    weighting : str, optional
        Label stored on the basis; defaults to ``"identity"`` or ``"mass"``.

    Returns
    -------
    PODBasis
        ``Psi = S E_R Lambda_R^{-1/2}`` with columns sign-normalized so the
        entry of largest magnitude is positive.
    """
    if energy is not None and rank is not None:
        raise ValueError("give either an energy cutoff or a rank, not both")
    S = snapshots.S if isinstance(snapshots, SnapshotMatrix) else SnapshotMatrix(snapshots).S
    if not np.any(S):
        raise ValueError("snapshot matrix is identically zero")
    if weighting is None:
        weighting = "identity" if P is None else "mass"

    lam, E = sla.eigh(_gram(S, P))
    lam, E = lam[::-1].copy(), E[:, ::-1]
    lam[lam < EIGENVALUE_CLAMP * lam[0]] = 0.0
    n_rank = int(np.count_nonzero(lam > 0))

    if rank is not None:
        R = int(rank)
        if R < 1:
            raise ValueError("rank must be at least 1")
        if R > n_rank:
            raise ValueError(f"requested rank {R} exceeds the numerical rank {n_rank} of the snapshots")
    elif energy is not None:
        if not 0 < energy <= 1:
            raise ValueError("energy cutoff must lie in (0, 1]")
        if energy >= 1.0:
            R = n_rank
        else:
            cum = np.cumsum(lam) / lam.sum()
            R = int(np.searchsorted(cum, energy) + 1)
            R = min(R, n_rank)
    else:
        R = n_rank

    Psi = S @ (E[:, :R] / np.sqrt(lam[:R]))
    # one Cholesky-QR pass when roundoff in small modes spoils orthonormality
    C = Psi.T @ (Psi if P is None else P @ Psi)
    if np.max(np.abs(C - np.eye(R))) > 1e-12:
        Lc = np.linalg.cholesky(0.5 * (C + C.T))
        Psi = sla.solve_triangular(Lc, Psi.T, lower=True).T
    return PODBasis(_fix_signs(Psi), lam, weighting)


def residual_energy(eigenvalues, R: int) -> float:
    """``1 - sum(lam[:R]) / sum(lam)``."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 <= R <= lam.size:
        raise ValueError(f"R={R} outside [0, {lam.size}]")
    total = lam.sum()
    if R == lam.size:
        return 0.0
    return float(max(0.0, 1.0 - lam[:R].sum() / total))


def _psi(basis_or_psi) -> np.ndarray:
    return basis_or_psi.Psi if isinstance(basis_or_psi, PODBasis) else np.asarray(basis_or_psi, dtype=float)


def best_fit_coefficients(basis, G, target) -> np.ndarray:
    """Reduced coordinates of the G-orthogonal projection of ``target`` onto ``span(Psi)``."""
    Psi = _psi(basis)
    GPsi = G @ Psi
    Gr = Psi.T @ GPsi
    try:
        cho = sla.cho_factor(0.5 * (Gr + Gr.T))
    except sla.LinAlgError as exc:
        raise ValueError("reduced Gram matrix is singular") from exc
    return sla.cho_solve(cho, GPsi.T @ np.asarray(target, dtype=float))


def best_fit_project(basis, G, target) -> np.ndarray:
    """``Psi (Psi^T G Psi)^{-1} Psi^T G target``; ``target`` may hold several columns."""
    return _psi(basis) @ best_fit_coefficients(basis, G, target)


def projection_error(basis, P, snapshots) -> float:
    """``sum_n ||a^n - Psi Psi^T P a^n||_P^2`` for a P-orthonormal ``Psi``."""
    Psi = _psi(basis)
    S = snapshots.S if isinstance(snapshots, SnapshotMatrix) else np.asarray(snapshots, dtype=float)
    PS = S if P is None else P @ S
    Rm = S - Psi @ (Psi.T @ PS)
    PR = Rm if P is None else P @ Rm
    return float(np.sum(Rm * PR))
