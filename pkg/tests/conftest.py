import math

import numpy as np
import pytest

from cdr_rom.assembly import CDRProblem, Discretization
from cdr_rom.fem_space import build_space
from cdr_rom.mesh import build_unit_square_mesh

B_EX = (0.5 * math.cos(math.pi / 3), 0.5 * math.sin(math.pi / 3))


def example1_problem(T=5.0):
    return CDRProblem(1e-3, B_EX, 1.0, lambda x, y: np.ones_like(x), T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def ex1_problem():
    return example1_problem()


@pytest.fixture(scope="session")
def desk_disc():
    """4x4 P2 space with Example-1 coefficients (49 interior dofs)."""
    space = build_space(build_unit_square_mesh(4), 2)
    return Discretization(space, example1_problem())


def space_of(n, p):
    return build_space(build_unit_square_mesh(n), p)


def make_tiny_context(n=3, T=0.2, truth_dt=0.01, rank=4):
    """Self-truth context: the Galerkin FOM on an n x n P2 mesh serves as its own truth."""
    from cdr_rom.fom import solve_fom
    from cdr_rom.pod import compute_pod, snapshots_from_trajectory
    from cdr_rom.sweep import ExperimentContext

    disc = Discretization(space_of(n, 2), example1_problem(T))
    g = disc.galerkin
    truth = solve_fom(g, truth_dt, int(round(T / truth_dt)), np.zeros(g.n))
    basis = compute_pod(snapshots_from_trajectory(truth), g.M, rank=rank)
    return ExperimentContext(disc, basis, truth, name="tiny", apg_dt=truth_dt)


@pytest.fixture(scope="session")
def tiny_context():
    return make_tiny_context()
