import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import random_measure, random_space
from coupling_lab.coupling import Coupling, identity_coupling, product_coupling
from coupling_lab.errors import ShapeMismatch, TooLargeForEnumeration
from coupling_lab.metric_measure import DiscreteMeasure, line_space
from coupling_lab.transport import (
    SurplusGrid,
    enumerate_optimal_vertices,
    evaluate_surplus,
    solve_dual,
    solve_primal,
    solve_transport,
    transportation_vertices,
)


def linprog_value(mu, nu, phi):
    """Independent LP oracle: HiGHS on the dense transportation LP."""
    m, n = phi.shape
    A = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
    b = np.concatenate([mu.w, nu.w])
    res = linprog(-phi.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0
    return -res.fun, res.x.reshape(m, n)


def is_forest(support, m, n):
    parent = list(range(m + n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for i, j in support:
        a, b = find(i), find(m + j)
        if a == b:
            return False
        parent[a] = b
    return True


@pytest.fixture
def uniform2():
    return DiscreteMeasure.uniform(line_space([0, 1]))


def test_evaluate_surplus_examples(uniform2):
    pi = identity_coupling(uniform2)
    assert evaluate_surplus(pi, np.zeros((2, 2))) == 0
    assert evaluate_surplus(product_coupling(uniform2, uniform2), np.full((2, 2), 3.5)) == 3.5
    assert evaluate_surplus(pi, [[0, 0], [0, 1]]) == 0.5
    with pytest.raises(ShapeMismatch):
        evaluate_surplus(pi, np.zeros((3, 2)))


def test_surplus_grid_rejects_nonfinite():
    with pytest.raises(ValueError):
        SurplusGrid([[0, np.inf]])


def test_two_by_two_supermodular(uniform2):
    phi = np.array([[0, 0], [0, 1.0]])
    # the polytope is {[[a, .5-a], [.5-a, a]] : 0 <= a <= .5}; its two vertices
    diag = Coupling(uniform2, uniform2, [[0.5, 0], [0, 0.5]])
    anti = Coupling(uniform2, uniform2, [[0, 0.5], [0.5, 0]])
    assert evaluate_surplus(diag, phi) == 0.5 and evaluate_surplus(anti, phi) == 0
    opt = solve_primal(uniform2, uniform2, phi)
    np.testing.assert_allclose(opt.plan.mass, diag.mass)
    assert opt.value == 0.5
    pot = solve_dual(uniform2, uniform2, phi)
    assert pot.value(uniform2, uniform2) == pytest.approx(0.5, abs=1e-12)


def test_point_mass_row():
    L = line_space([0, 1, 2])
    mu = DiscreteMeasure.point_mass(line_space([0]), 0)
    nu = DiscreteMeasure(L, [0.2, 0.5, 0.3])
    phi = np.array([[1.0, -2.0, 4.0]])
    opt = solve_primal(mu, nu, phi)
    np.testing.assert_allclose(opt.plan.mass, [nu.w])
    assert opt.value == pytest.approx(0.2 - 1.0 + 1.2, abs=1e-15)


def test_positive_assortative_matching():
    u = DiscreteMeasure.uniform(line_space([0, 1, 2]))
    phi = np.outer([0, 1, 2], [0, 1, 2]).astype(float)
    opt = solve_primal(u, u, phi)
    np.testing.assert_allclose(opt.plan.mass, np.eye(3) / 3, atol=1e-15)
    assert opt.value == pytest.approx(5 / 3, abs=1e-12)
    verts = transportation_vertices(u, u)
    assert max(float(np.sum(v * phi)) for v in verts) == pytest.approx(5 / 3, abs=1e-12)


def test_zero_surplus_duals_are_zero(rng):
    X, Y = random_space(rng, 4), random_space(rng, 3)
    pot = solve_dual(random_measure(rng, X), random_measure(rng, Y), np.zeros((4, 3)))
    np.testing.assert_array_equal(pot.u, 0)
    np.testing.assert_array_equal(pot.v, 0)


def check_instance(mu, nu, phi):
    opt, pot = solve_transport(mu, nu, phi)
    assert pot.u[0] == 0
    assert np.all(pot.slack(phi) >= -1e-9)
    gap = abs(pot.value(mu, nu) - opt.value)
    assert gap <= 1e-8
    assert np.max(np.abs(opt.plan.mass.sum(1) - mu.w)) <= 1e-10
    assert np.max(np.abs(opt.plan.mass.sum(0) - nu.w)) <= 1e-10
    supp = opt.plan.mass > 1e-12
    assert np.all(np.abs(pot.slack(phi)[supp]) <= 1e-9)
    assert opt.value >= evaluate_surplus(product_coupling(mu, nu), phi) - 1e-12
    return opt


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duality_and_linprog_agreement(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 7, size=2)
    X, Y = random_space(rng, int(m)), random_space(rng, int(n))
    mu, nu = random_measure(rng, X, 0.25), random_measure(rng, Y, 0.25)
    phi = rng.normal(size=(m, n)) * rng.choice([1e-3, 1, 100])
    opt = check_instance(mu, nu, phi)
    ref, _ = linprog_value(mu, nu, phi)
    assert opt.value == pytest.approx(ref, abs=1e-7 * max(1, np.abs(phi).max()))


def test_degenerate_zero_one_grids_terminate(rng):
    for _ in range(100):
        k = int(rng.integers(2, 9))
        S = random_space(rng, k)
        P, Q = random_measure(rng, S, 0.3), random_measure(rng, S, 0.3)
        phi = -(S.dist >= rng.random()).astype(float)
        check_instance(P, Q, phi)


def test_integer_uniform_assignment_degenerate(rng):
    u = DiscreteMeasure.uniform(line_space(range(6)))
    for _ in range(20):
        phi = rng.integers(0, 3, size=(6, 6)).astype(float)
        opt = check_instance(u, u, phi)
        ref, _ = linprog_value(u, u, phi)
        assert opt.value == pytest.approx(ref, abs=1e-9)


def test_shape_mismatch(uniform2):
    with pytest.raises(ShapeMismatch):
        solve_primal(uniform2, uniform2, np.zeros((2, 3)))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_birkhoff_vertex_count(n):
    u = DiscreteMeasure.uniform(line_space(range(n)))
    verts = transportation_vertices(u, u)
    assert len(verts) == math.factorial(n)
    for v in verts:
        np.testing.assert_allclose(np.sort(v.ravel())[-n:], 1 / n)


def test_vertices_are_feasible_forests_and_cover_linprog_optima(rng):
    for _ in range(30):
        m, n = (int(k) for k in rng.integers(1, 5, size=2))
        X, Y = random_space(rng, m), random_space(rng, n)
        mu, nu = random_measure(rng, X, 0.2), random_measure(rng, Y, 0.2)
        verts = transportation_vertices(mu, nu)
        for v in verts:
            Coupling(mu, nu, v, tol=1e-12)
            assert is_forest([tuple(c) for c in np.argwhere(v > 0)], m, n)
        for _ in range(5):
            phi = rng.normal(size=(m, n))
            _, x = linprog_value(mu, nu, phi)
            assert min(np.max(np.abs(x - v)) for v in verts) <= 1e-9


def test_enumerate_examples(uniform2):
    assert len(enumerate_optimal_vertices(uniform2, uniform2, [[0, 0], [0, 1]])) == 1
    assert len(enumerate_optimal_vertices(uniform2, uniform2, np.zeros((2, 2)))) == 2
    opt = enumerate_optimal_vertices(uniform2, uniform2, [[1, 1], [1, 0]])
    assert len(opt) == 1
    np.testing.assert_allclose(opt[0].mass, [[0, 0.5], [0.5, 0]])
    assert solve_primal(uniform2, uniform2, [[1, 1], [1, 0]]).value == 1


def test_enumerate_limit():
    u = DiscreteMeasure.uniform(line_space(range(5)))
    with pytest.raises(TooLargeForEnumeration):
        enumerate_optimal_vertices(u, u, np.zeros((5, 5)))


def test_optimal_set_invariant_under_affine_rescaling(rng):
    for _ in range(30):
        m, n = (int(k) for k in rng.integers(1, 5, size=2))
        mu = random_measure(rng, random_space(rng, m))
        nu = random_measure(rng, random_space(rng, n))
        phi = rng.integers(-2, 3, size=(m, n)).astype(float)  # ties likely
        a, c = rng.uniform(0.5, 3), rng.uniform(-5, 5)
        base = sorted(tuple(np.round(v.mass.ravel(), 10)) for v in enumerate_optimal_vertices(mu, nu, phi))
        scaled = sorted(tuple(np.round(v.mass.ravel(), 10))
                        for v in enumerate_optimal_vertices(mu, nu, a * phi + c))
        assert base == scaled
        V = solve_primal(mu, nu, phi).value
        assert solve_primal(mu, nu, a * phi + c).value == pytest.approx(a * V + c, abs=1e-9)


def test_lp_value_attained_at_a_vertex(rng):
    for _ in range(50):
        m, n = (int(k) for k in rng.integers(1, 5, size=2))
        mu = random_measure(rng, random_space(rng, m), 0.2)
        nu = random_measure(rng, random_space(rng, n), 0.2)
        phi = rng.normal(size=(m, n))
        best = max(float(np.sum(v * phi)) for v in transportation_vertices(mu, nu))
        assert solve_primal(mu, nu, phi).value == pytest.approx(best, abs=1e-12)
