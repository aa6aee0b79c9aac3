import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cdr_rom.assembly import (
    CDRProblem,
    Discretization,
    StabilizationKind,
    assemble_galerkin,
    assemble_stabilization,
    assemble_unrestricted,
    galerkin_element_matrices,
    grid_peclet,
)
from cdr_rom.fem_space import eval_shape, triangle_quadrature

from conftest import B_EX, example1_problem, space_of

K = StabilizationKind
STAB_KINDS = [K.SUPG, K.GLS_DS, K.ADJ_DS, K.GLS_ST, K.ADJ_ST]


def test_peclet_examples():
    assert grid_peclet(0.5, 1 / 64, 1e-3) == 7.8125
    assert grid_peclet(0.5, 1 / 512, 1e-4) == 9.765625
    assert grid_peclet(1.0, 1.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        grid_peclet(1.0, 0.0, 1.0)


def test_problem_validation():
    f = lambda x, y: x
    for eps, sigma, T in [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)]:
        with pytest.raises(ValueError):
            CDRProblem(eps, (1.0, 0.0), sigma, f, T)


def test_unrestricted_mass_and_diffusion():
    space = space_of(4, 2)
    M, D, A = assemble_unrestricted(space, example1_problem())
    assert abs(M.sum() - 1.0) < 1e-13
    assert np.abs(np.asarray(D.sum(axis=1))).max() < 1e-13
    assert np.abs(np.asarray(A.sum(axis=1))).max() < 1e-13


def test_p1_element_mass_symbolic_pattern():
    space = space_of(2, 1)
    Me, _, _, _ = galerkin_element_matrices(space, example1_problem())
    area = 1 / 8
    expect = area / 12 * (np.ones((3, 3)) + np.eye(3))
    for e in range(space.mesh.n_triangles):
        np.testing.assert_allclose(Me[e], expect, atol=1e-15)


@pytest.mark.parametrize("p", [1, 2])
def test_galerkin_structure(p, rng):
    problem = example1_problem()
    ops = assemble_galerkin(space_of(5, p), problem)
    for X in (ops.M, ops.D):
        assert abs(X - X.T).max() < 1e-15
    x = rng.standard_normal((ops.n, 100))
    assert np.all(np.einsum("ik,ik->k", x, ops.M @ x) > 0)
    assert np.all(np.einsum("ik,ik->k", x, ops.D @ x) > 0)
    xAx = np.einsum("ik,ik->k", x, ops.A @ x)
    assert np.all(np.abs(xAx) <= 1e-12 * np.einsum("ik,ik->k", x, x))
    resid = ops.B - ops.A - problem.epsilon * ops.D - problem.sigma * ops.M
    assert abs(resid).max() <= 4 * np.finfo(float).eps * abs(ops.B).max()


def test_galerkin_coercivity(rng):
    problem = example1_problem()
    ops = assemble_galerkin(space_of(4, 2), problem)
    for _ in range(100):
        x = rng.standard_normal(ops.n)
        lhs = x @ ops.B @ x
        rhs = problem.epsilon * x @ ops.D @ x + problem.sigma * x @ ops.M @ x
        assert lhs > 0
        assert abs(lhs - rhs) <= 1e-12 * abs(rhs)


def test_deterministic_assembly():
    space = space_of(3, 2)
    a = Discretization(space, example1_problem()).operators(K.GLS_DS, 0.1, 1e-2)
    b = Discretization(space, example1_problem()).operators(K.GLS_DS, 0.1, 1e-2)
    for name in ("M", "D", "A", "B", "Q_static", "M_S"):
        X, Y = getattr(a, name), getattr(b, name)
        np.testing.assert_array_equal(X.indices, Y.indices)
        np.testing.assert_array_equal(X.data, Y.data)
    np.testing.assert_array_equal(a.f_S, b.f_S)


@pytest.mark.parametrize("kind", STAB_KINDS)
def test_tau_zero_and_linearity(kind):
    space = space_of(3, 2)
    problem = example1_problem()
    Q0, MS0, fS0 = assemble_stabilization(space, problem, kind, 0.0, 1e-2)
    assert abs(Q0).max() == 0 and abs(MS0).max() == 0 and not np.any(fS0)
    Q1, MS1, fS1 = assemble_stabilization(space, problem, kind, 0.05, 1e-2)
    Q2, MS2, fS2 = assemble_stabilization(space, problem, kind, 0.10, 1e-2)
    assert abs(Q2 - 2 * Q1).max() <= 1e-15 * abs(Q2).max() * 10
    assert abs(MS2 - 2 * MS1).max() <= 1e-15 * abs(MS2).max() * 10
    np.testing.assert_allclose(fS2, 2 * fS1, rtol=1e-14, atol=1e-18)


def test_stabilization_rejects_none_and_negative_tau():
    space = space_of(2, 1)
    with pytest.raises(ValueError):
        assemble_stabilization(space, example1_problem(), K.NONE, 0.1, 1e-2)
    with pytest.raises(ValueError):
        assemble_stabilization(space, example1_problem(), K.SUPG, -0.1, 1e-2)


def _brute_force_supg_p1(space, problem, tau, dt):
    """Per-element loop with an independent degree-4 rule (P1 has no Laplacian)."""
    rule = triangle_quadrature(4)
    n = space.n_dofs_total
    Q = np.zeros((n, n))
    b = np.array(problem.b)
    for t in range(space.mesh.n_triangles):
        dofs = space.cell_dof_map[t]
        area = space.areas[t]
        for lam, w in zip(rule.points, rule.weights):
            vals, grads, laps = eval_shape(space, t, lam)
            assert not np.any(laps)
            conv = grads @ b
            Q[np.ix_(dofs, dofs)] += 2 * area * w * tau * np.outer(
                conv, conv + problem.sigma * vals + vals / dt)
    inner = space.interior_dofs
    return Q[np.ix_(inner, inner)]


def test_supg_p1_matches_brute_force():
    space = space_of(3, 1)
    problem = example1_problem()
    Q, _, _ = assemble_stabilization(space, problem, K.SUPG, 0.3, 0.02)
    np.testing.assert_allclose(Q.toarray(), _brute_force_supg_p1(space, problem, 0.3, 0.02), atol=1e-14)


def test_gls_ds_equals_gls_st_plus_time_term():
    space = space_of(3, 2)
    problem = example1_problem()
    tau, dt = 0.07, 0.01
    Q_ds, MS_ds, fS_ds = assemble_stabilization(space, problem, K.GLS_DS, tau, dt)
    Q_st, MS_st, fS_st = assemble_stabilization(space, problem, K.GLS_ST, tau, dt)
    # the DS test function carries an extra v / dt
    disc = Discretization(space, problem)
    vv = disc.pieces.pairs[0][0]
    vL = disc.pieces.combine(np.array([1.0, 0, 0]), problem.strong_coeffs() + np.array([1 / dt, 0, 0]))
    np.testing.assert_allclose((Q_ds - Q_st).toarray(), (tau / dt * vL).toarray(), atol=1e-12)
    np.testing.assert_allclose((MS_ds - MS_st).toarray(), (tau / dt * vv).toarray(), atol=1e-12)
    np.testing.assert_allclose(fS_ds - fS_st, tau / dt * disc.pieces.loads[0], atol=1e-12)


def test_supg_is_time_step_independent_apart_from_mass_term():
    space = space_of(3, 2)
    disc = Discretization(space, example1_problem())
    a = disc.operators(K.SUPG, 0.1, 1e-2)
    b = disc.operators(K.SUPG, 0.1, 1e-3)
    assert abs(a.Q_static - b.Q_static).max() == 0
    assert abs(a.Q_at(1e-3) - b.Q).max() < 1e-12


def test_ds_operators_refuse_other_dt():
    disc = Discretization(space_of(2, 2), example1_problem())
    ops = disc.operators(K.ADJ_DS, 0.1, 1e-2)
    with pytest.raises(ValueError):
        ops.dynamics(1e-3)


def test_p1_laplacian_channel_vanishes():
    disc = Discretization(space_of(3, 1), example1_problem())
    for x in range(3):
        assert abs(disc.pieces.pairs[x][2]).max() == 0


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(1e-4, 1.0), st.sampled_from(STAB_KINDS))
def test_tau_linearity_property(tau, dt, kind):
    disc = _PROPERTY_DISC
    a = disc.operators(kind, tau, dt)
    b = disc.operators(kind, 2 * tau, dt)
    scale = abs(b.Q).max()
    assert abs(b.Q - 2 * a.Q).max() <= 1e-13 * scale


_PROPERTY_DISC = Discretization(space_of(2, 2), CDRProblem(1e-3, B_EX, 1.0, lambda x, y: 1 + 0 * x, 1.0))


def test_sparse_formats():
    ops = Discretization(space_of(2, 2), example1_problem()).operators(K.GLS_ST, 0.1, 0.1)
    for X in (ops.M, ops.D, ops.A, ops.B, ops.Q, ops.M_S):
        assert sp.isspmatrix_csr(X) and X.shape == (ops.n, ops.n)
