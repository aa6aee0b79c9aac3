"""Stabilized finite elements and projection-based reduced-order models for the
transient convection-diffusion-reaction equation."""

from .assembly import (
    AssembledOperators,
    CDRProblem,
    Discretization,
    StabilizationKind,
    assemble_galerkin,
    assemble_stabilization,
    grid_peclet,
)
from .config import ExperimentConfig, ForcingSpec, preset
from .fem_space import FunctionSpace, build_space, eval_shape, triangle_quadrature
from .fom import Trajectory, project_initial_condition, restrict_to_coarse, solve_fom
from .formulations import FORMULATION_NAMES, get_formulation
from .mesh import StructuredTriMesh, build_unit_square_mesh, locate_point
from .metrics import ErrorReport, Status, time_integrated_errors
from .pod import PODBasis, SnapshotMatrix, best_fit_project, compute_pod, residual_energy
from .rom_core import InnerProduct, ReducedOperators, reduce_continuous, reduce_discrete_galerkin, solve_rom
from .rom_petrov import APGConfig, LSPGConfig, apg_reduce, apg_test_basis, lspg_reduce
from .sweep import SweepGrid, SweepResult, default_grid, run_sweep, score_formulations, select_optimal

__version__ = "0.1.0"

__all__ = [
    "AssembledOperators",
    "CDRProblem",
    "Discretization",
    "StabilizationKind",
    "assemble_galerkin",
    "assemble_stabilization",
    "grid_peclet",
    "ExperimentConfig",
    "ForcingSpec",
    "preset",
    "FunctionSpace",
    "build_space",
    "eval_shape",
    "triangle_quadrature",
    "Trajectory",
    "project_initial_condition",
    "restrict_to_coarse",
    "solve_fom",
    "FORMULATION_NAMES",
    "get_formulation",
    "StructuredTriMesh",
    "build_unit_square_mesh",
    "locate_point",
    "ErrorReport",
    "Status",
    "time_integrated_errors",
    "PODBasis",
    "SnapshotMatrix",
    "best_fit_project",
    "compute_pod",
    "residual_energy",
    "InnerProduct",
    "ReducedOperators",
    "reduce_continuous",
    "reduce_discrete_galerkin",
    "solve_rom",
    "APGConfig",
    "LSPGConfig",
    "apg_reduce",
    "apg_test_basis",
    "lspg_reduce",
    "SweepGrid",
    "SweepResult",
    "default_grid",
    "run_sweep",
    "score_formulations",
    "select_optimal",
]
