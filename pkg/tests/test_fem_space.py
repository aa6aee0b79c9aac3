import math

import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings
from hypothesis import strategies as st

from cdr_rom.fem_space import build_space, element_data, eval_shape, triangle_quadrature
from cdr_rom.mesh import build_unit_square_mesh

from conftest import space_of


def _p2_symbolic(verts):
    """Physical P2 Lagrange basis on a triangle, built by sympy from nodal conditions."""
    x, y = sym.symbols("x y")
    monos = [1, x, y, x * x, x * y, y * y]
    a, b, c = [sym.Matrix(v) for v in verts]
    nodes = [a, b, c, (a + b) / 2, (b + c) / 2, (c + a) / 2]
    V = sym.Matrix([[sym.sympify(m).subs({x: p[0], y: p[1]}) for m in monos] for p in nodes])
    coeffs = V.inv()  # column k gives basis k
    basis = [sum(coeffs[i, k] * monos[i] for i in range(6)) for k in range(6)]
    return x, y, basis


@pytest.mark.parametrize("n, p, total, interior", [
    (32, 2, 4225, 3969), (1, 1, 4, 0), (2, 1, 9, 1), (4, 2, 81, 49), (5, 1, 36, 16),
])
def test_dof_counts(n, p, total, interior):
    space = space_of(n, p)
    assert space.n_dofs_total == total
    assert space.n_interior == interior


@pytest.mark.parametrize("n, p", [(3, 1), (3, 2), (6, 2)])
def test_boundary_classification(n, p):
    space = space_of(n, p)
    xy = space.dof_coords
    on_gamma = np.isclose(xy, 0).any(axis=1) | np.isclose(xy, 1).any(axis=1)
    np.testing.assert_array_equal(space.boundary_dof_flags, on_gamma)
    assert len(np.unique(np.round(xy * 4 * n).astype(int), axis=0)) == space.n_dofs_total


def test_cell_dofs_sit_at_nodes():
    space = space_of(3, 2)
    verts = space.mesh.vertices[space.mesh.triangles]
    expect = np.concatenate([verts, 0.5 * (verts + verts[:, [1, 2, 0]])], axis=1)
    np.testing.assert_allclose(space.dof_coords[space.cell_dof_map], expect, atol=1e-15)


def test_unsupported_degree():
    with pytest.raises(ValueError):
        build_space(build_unit_square_mesh(2), 3)


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4, 5, 6, 8])
def test_quadrature_exact_on_monomials(degree):
    rule = triangle_quadrature(degree)
    assert abs(rule.weights.sum() - 0.5) < 1e-15
    x, y = rule.points[:, 1], rule.points[:, 2]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            assert abs(rule.weights @ (x ** i * y ** j) - exact) < 1e-15


def test_p1_vertex_values():
    space = space_of(2, 1)
    vals, grads, laps = eval_shape(space, 3, [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(vals, [0, 1, 0])
    np.testing.assert_array_equal(laps, 0)
    np.testing.assert_allclose(grads.sum(axis=0), 0, atol=1e-13)


def test_p2_matches_symbolic_oracle(rng):
    space = space_of(3, 2)
    for tri in (0, 5, 11):
        verts = space.mesh.vertices[space.mesh.triangles[tri]]
        x, y, basis = _p2_symbolic([sym.Rational(int(round(v * 3)), 3) for v in row] for row in verts)
        funcs = [sym.lambdify((x, y), [f, sym.diff(f, x), sym.diff(f, y), sym.diff(f, x, 2) + sym.diff(f, y, 2)])
                 for f in basis]
        for _ in range(10):
            lam = rng.dirichlet(np.ones(3))
            pt = lam @ verts
            vals, grads, laps = eval_shape(space, tri, lam)
            ref = np.array([np.array(f(*pt), dtype=float) for f in funcs])
            np.testing.assert_allclose(vals, ref[:, 0], atol=1e-13)
            np.testing.assert_allclose(grads, ref[:, 1:3], atol=1e-12)
            np.testing.assert_allclose(laps, ref[:, 3], atol=1e-10)


@pytest.mark.parametrize("p", [1, 2])
def test_partition_of_unity_at_quadrature_points(p):
    ed = element_data(space_of(4, p), 6)
    np.testing.assert_allclose(ed.values.sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(ed.grads.sum(axis=2), 0.0, atol=1e-12)


def test_interpolation_reproduces_quadratics(rng):
    space = space_of(5, 2)
    f = lambda x, y: 1 + 2 * x - 3 * y + x * x - 0.5 * x * y + 4 * y * y
    coeffs = space.interpolate(f)
    pts = rng.random((200, 2))
    np.testing.assert_allclose(space.evaluate(coeffs, pts), f(pts[:, 0], pts[:, 1]), atol=1e-12)


def test_continuity_across_shared_edges(rng):
    space = space_of(3, 2)
    coeffs = rng.standard_normal(space.n_dofs_total)
    # points on the diagonal of cell 4 evaluated from both sides
    for t in rng.random(5):
        lower = np.array([1 - t, 0.0, t])  # lower: (v00, v10, v11)
        upper = np.array([1 - t, t, 0.0])  # upper: (v00, v11, v01)
        vl, _, _ = eval_shape(space, 8, lower)
        vu, _, _ = eval_shape(space, 9, upper)
        assert abs(vl @ coeffs[space.cell_dof_map[8]] - vu @ coeffs[space.cell_dof_map[9]]) < 1e-13


def test_eval_shape_rejects_bad_input():
    space = space_of(2, 2)
    with pytest.raises(IndexError):
        eval_shape(space, 99, [1, 0, 0])
    with pytest.raises(ValueError):
        eval_shape(space, 0, [0.5, 0.6, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 17), st.floats(0, 1), st.floats(0, 1))
def test_shape_partition_property(tri, s, t):
    space = space_of(3, 2)
    lam = np.array([1 - s, s * (1 - t), s * t])
    vals, grads, laps = eval_shape(space, tri, lam)
    assert abs(vals.sum() - 1) < 1e-13
    np.testing.assert_allclose(grads.sum(axis=0), 0, atol=1e-11)
    assert abs(laps.sum()) < 1e-9
