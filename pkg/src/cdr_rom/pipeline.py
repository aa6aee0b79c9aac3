"""Truth generation, restriction, basis construction and ROM context for one experiment."""

from __future__ import annotations

import logging

from .assembly import Discretization
from .config import ExperimentConfig
from .fem_space import FunctionSpace, build_space
from .fom import Trajectory, project_initial_condition, restrict_trajectory, solve_fom
from .mesh import build_unit_square_mesh
from .pod import PODBasis, compute_pod, snapshots_from_trajectory
from .sweep import ExperimentContext, SweepGrid, default_grid

log = logging.getLogger(__name__)


def truth_space(cfg: ExperimentConfig) -> FunctionSpace:
    return build_space(build_unit_square_mesh(cfg.truth_n), cfg.truth_p)


def fom_space(cfg: ExperimentConfig) -> FunctionSpace:
    return build_space(build_unit_square_mesh(cfg.fom_n), cfg.fom_p)


def log_peclet(cfg: ExperimentConfig) -> tuple[float, float]:
    pe_truth, pe_fom = cfg.peclet_numbers()
    log.info("grid Peclet number (truth, n=%d p=%d): %.10g", cfg.truth_n, cfg.truth_p, pe_truth)
    log.info("grid Peclet number (FOM, n=%d p=%d): %.10g", cfg.fom_n, cfg.fom_p, pe_fom)
    return pe_truth, pe_fom


def run_truth(cfg: ExperimentConfig) -> tuple[Trajectory, Trajectory]:
    """Galerkin truth solve on the fine space and its L2 restriction to the FOM space."""
    log_peclet(cfg)
    fine = truth_space(cfg)
    problem = cfg.problem()
    ops = Discretization(fine, problem).galerkin
    a0 = project_initial_condition(fine, problem.u0, ops.M)
    log.info("truth solve: %d unknowns, %d steps", ops.n, cfg.n_truth_steps)
    truth = solve_fom(ops, cfg.truth_dt, cfg.n_truth_steps, a0)
    coarse = restrict_trajectory(fine, truth, fom_space(cfg))
    return truth, coarse


def build_basis(cfg: ExperimentConfig, restricted: Trajectory, M) -> PODBasis:
    """Mass-weighted POD of the restricted truth, truncated by energy or to ``max(R_values)``."""
    snaps = snapshots_from_trajectory(restricted)
    if cfg.energy_cutoff is not None:
        return compute_pod(snaps, M, energy=cfg.energy_cutoff)
    try:
        return compute_pod(snaps, M, rank=max(cfg.R_values))
    except ValueError:
        log.warning("snapshots have rank below %d; keeping the numerical rank", max(cfg.R_values))
        return compute_pod(snaps, M, energy=1.0)


def make_context(cfg: ExperimentConfig, basis: PODBasis, restricted: Trajectory) -> ExperimentContext:
    disc = Discretization(fom_space(cfg), cfg.problem())
    a0 = project_initial_condition(disc.space, disc.problem.u0, disc.galerkin.M)
    return ExperimentContext(disc, basis, restricted, a0, name=cfg.name, apg_dt=cfg.apg_dt)


def sweep_grid(cfg: ExperimentConfig, R_values=None) -> SweepGrid:
    base = default_grid(R_values or cfg.R_values)
    s = cfg.sweep
    return SweepGrid(s.get("tau", base.tau_values), s.get("dt", base.dt_values),
                     s.get("tau_apg", base.tau_apg_values), base.R_values)
