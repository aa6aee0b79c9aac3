import numpy as np
import pytest
import scipy.sparse as sp

from cdr_rom.assembly import CDRProblem, Discretization, StabilizationKind
from cdr_rom.fem_space import element_data
from cdr_rom.fom import (
    SingularSystemError,
    Trajectory,
    factorize,
    load_vector,
    mass_matrix,
    project_initial_condition,
    prolong,
    restrict_to_coarse,
    solve_fom,
    step_residuals,
    transfer_matrix,
)
from cdr_rom.snapio import read_snap, write_snap

from conftest import B_EX, example1_problem, space_of

K = StabilizationKind


def _zero_problem():
    return CDRProblem(1e-3, B_EX, 1.0, lambda x, y: 0 * x, 1.0)


def test_zero_fixed_point():
    ops = Discretization(space_of(3, 2), _zero_problem()).galerkin
    traj = solve_fom(ops, 0.1, 5, np.zeros(ops.n))
    assert not np.any(traj.states)
    assert traj.states.shape == (ops.n, 6)
    np.testing.assert_allclose(traj.times, 0.1 * np.arange(6))


def test_one_step_matches_dense_solve():
    # a 2-triangle mesh has no interior dof, so use n=3 P1 (four unknowns)
    ops = Discretization(space_of(3, 1), example1_problem()).galerkin
    a0 = np.arange(1.0, ops.n + 1)
    dt = 0.05
    traj = solve_fom(ops, dt, 1, a0)
    M, B = ops.M.toarray(), ops.B.toarray()
    ref = np.linalg.solve(M / dt + B, ops.f + M @ a0 / dt)
    np.testing.assert_allclose(traj.states[:, 1], ref, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("kind", [K.SUPG, K.GLS_DS, K.ADJ_ST])
def test_stabilized_step_matches_dense_solve(kind, rng):
    disc = Discretization(space_of(3, 2), example1_problem())
    dt = 0.02
    ops = disc.operators(kind, 0.05, dt)
    a0 = rng.standard_normal(ops.n)
    traj = solve_fom(ops, dt, 2, a0)
    M, B, Q, MS = (X.toarray() for X in (ops.M, ops.B, ops.Q, ops.M_S))
    a1 = np.linalg.solve(M / dt + B + Q, ops.f + ops.f_S + (M + MS) @ a0 / dt)
    a2 = np.linalg.solve(M / dt + B + Q, ops.f + ops.f_S + (M + MS) @ a1 / dt)
    np.testing.assert_allclose(traj.states[:, 2], a2, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("kind", [K.SUPG, K.GLS_DS, K.ADJ_DS, K.GLS_ST, K.ADJ_ST])
def test_tau_zero_equals_galerkin(kind):
    disc = Discretization(space_of(3, 2), example1_problem())
    g = solve_fom(disc.galerkin, 0.01, 20, np.zeros(disc.galerkin.n))
    s = solve_fom(disc.operators(kind, 0.0, 0.01), 0.01, 20, np.zeros(disc.galerkin.n))
    np.testing.assert_allclose(s.states, g.states, atol=1e-12)


def test_ds_dt_mismatch_rejected():
    disc = Discretization(space_of(2, 2), example1_problem())
    with pytest.raises(ValueError):
        solve_fom(disc.operators(K.GLS_DS, 0.1, 0.01), 0.02, 3, np.zeros(disc.galerkin.n))


def test_singular_matrix_reported():
    with pytest.raises(SingularSystemError):
        factorize(sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])))


def test_linearity_in_data(rng):
    space = space_of(3, 2)
    f = lambda x, y: np.sin(3 * x) + y
    p1 = CDRProblem(1e-2, B_EX, 1.0, f, 1.0)
    p2 = CDRProblem(1e-2, B_EX, 1.0, lambda x, y: 2 * f(x, y), 1.0)
    a0 = rng.standard_normal(space.n_interior)
    t1 = solve_fom(Discretization(space, p1).operators(K.SUPG, 0.1, 0.05), 0.05, 10, a0)
    t2 = solve_fom(Discretization(space, p2).operators(K.SUPG, 0.1, 0.05), 0.05, 10, 2 * a0)
    np.testing.assert_allclose(t2.states, 2 * t1.states, rtol=1e-11, atol=1e-14)


@pytest.mark.parametrize("kind", [K.NONE, K.SUPG, K.GLS_DS, K.ADJ_ST])
def test_step_residual_vanishes(kind):
    disc = Discretization(space_of(4, 2), example1_problem())
    ops = disc.operators(kind, 0.05, 1e-2)
    traj = solve_fom(ops, 1e-2, 30, np.zeros(ops.n))
    assert step_residuals(ops, traj).max() <= 1e-10 * np.linalg.norm(ops.f)


def test_projection_of_zero():
    space = space_of(4, 2)
    assert not np.any(project_initial_condition(space, lambda x, y: 0 * x))
    assert not np.any(project_initial_condition(space, None))


def test_projection_is_identity_on_the_space(rng):
    # no nonzero global quadratic vanishes on all four sides, so use a piecewise P2 function
    space = space_of(4, 2)
    coeffs = rng.standard_normal(space.n_interior)
    full = space.embed(coeffs)
    u0 = lambda x, y: space.evaluate(full, np.column_stack([np.ravel(x), np.ravel(y)])).reshape(np.shape(x))
    np.testing.assert_allclose(project_initial_condition(space, u0), coeffs, atol=1e-10)


def _l2_error(space, coeffs, func):
    ed = element_data(space, 8)
    full = space.embed(coeffs)[space.cell_dof_map]
    uh = np.einsum("qi,ei->eq", ed.values, full)
    u = func(ed.points[..., 0], ed.points[..., 1])
    return np.sqrt(np.sum(ed.jxw * (u - uh) ** 2))


def test_projection_converges():
    u0 = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    errs = [_l2_error(s, project_initial_condition(s, u0), u0) for s in (space_of(4, 2), space_of(8, 2))]
    assert errs[1] < errs[0] / 4


def test_restriction_identity_on_subspace(rng):
    coarse, fine = space_of(2, 2), space_of(4, 2)
    a_c = rng.standard_normal(coarse.n_interior)
    a_f = prolong(coarse, a_c, fine)
    np.testing.assert_allclose(restrict_to_coarse(fine, a_f, coarse), a_c, atol=1e-10)
    assert not np.any(restrict_to_coarse(fine, np.zeros(fine.n_interior), coarse))


def test_restriction_matrix_columns(rng):
    coarse, fine = space_of(2, 2), space_of(6, 2)
    A = rng.standard_normal((fine.n_interior, 3))
    out = restrict_to_coarse(fine, A, coarse)
    for k in range(3):
        np.testing.assert_allclose(out[:, k], restrict_to_coarse(fine, A[:, k], coarse), atol=1e-14)


def test_transfer_matrix_matches_brute_force_quadrature():
    coarse, fine = space_of(2, 2), space_of(4, 2)
    T = transfer_matrix(fine, coarse).toarray()
    j = fine.n_interior // 2  # one fine basis function
    e = np.zeros(fine.n_interior)
    e[j] = 1.0
    # independent oracle: high-order rule on the fine mesh, coarse basis by point evaluation
    ed = element_data(fine, 10)
    pts = ed.points.reshape(-1, 2)
    w = ed.jxw.ravel()
    vf = fine.evaluate(fine.embed(e), pts)
    for i in range(coarse.n_interior):
        ec = np.zeros(coarse.n_interior)
        ec[i] = 1.0
        vc = coarse.evaluate(coarse.embed(ec), pts)
        assert abs(T[i, j] - np.sum(w * vc * vf)) < 1e-12


def test_non_nested_rejected():
    with pytest.raises(ValueError):
        restrict_to_coarse(space_of(5, 2), np.zeros(space_of(5, 2).n_interior), space_of(2, 2))


def test_load_vector_constant():
    space = space_of(3, 2)
    M = mass_matrix(space)
    f = load_vector(space, lambda x, y: np.ones_like(x))
    np.testing.assert_allclose(f, Discretization(space, example1_problem()).galerkin.f, atol=1e-15)
    assert M.shape == (space.n_interior,) * 2


def test_snap_roundtrip(tmp_path, rng):
    A = rng.standard_normal((7, 4))
    write_snap(tmp_path / "a.snap", A, 0.25)
    B, dt = read_snap(tmp_path / "a.snap")
    np.testing.assert_array_equal(A, B)
    assert dt == 0.25
    raw = (tmp_path / "a.snap").read_bytes()
    assert raw[:8] == b"ROMSNAP1"
    assert int.from_bytes(raw[8:16], "little") == 7
    assert int.from_bytes(raw[16:24], "little") == 4
    assert int.from_bytes(raw[24:32], "little") == 0
    # column-major: second stored value is A[1, 0]
    assert np.frombuffer(raw[40:48], "<f8")[0] == A[1, 0]
    assert len(raw) == 32 + 8 * 28 + 8


def test_snap_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"NOTASNAP" + bytes(32))
    with pytest.raises(ValueError):
        read_snap(tmp_path / "bad")
    write_snap(tmp_path / "ok", np.ones((2, 2)), 1.0)
    (tmp_path / "short").write_bytes((tmp_path / "ok").read_bytes()[:-3])
    with pytest.raises(ValueError):
        read_snap(tmp_path / "short")


def test_trajectory_persistence(tmp_path, rng):
    traj = Trajectory(1e-3, rng.standard_normal((5, 11)))
    traj.save(tmp_path / "t.snap")
    back = Trajectory.load(tmp_path / "t.snap")
    assert back.dt == traj.dt and back.n_steps == 10
    np.testing.assert_array_equal(back.states, traj.states)
    assert abs(back.T - 0.01) < 1e-15
