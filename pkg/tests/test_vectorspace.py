import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from cuga.vectorspace import (
    BudgetPolytope,
    DegeneratePolytopeWarning,
    block,
    blocks,
    hit_and_run,
    is_feasible_profile,
    lmo,
    project,
    replace_block,
    sample_profiles,
    zero_block,
)


def poly(c, b, ubar):
    return BudgetPolytope(np.array(c, float), b, np.array(ubar, float))


@st.composite
def polytopes(draw, max_dim=4):
    d = draw(st.integers(1, max_dim))
    fl = st.floats(0.0, 3.0, allow_nan=False)
    c = np.array(draw(st.lists(fl, min_size=d, max_size=d)))
    ubar = np.array(draw(st.lists(fl, min_size=d, max_size=d)))
    b = draw(st.floats(0.05, 3.0))
    return BudgetPolytope(c, b, ubar)


# construction -----------------------------------------------------------------


def test_polytope_rejects_bad_inputs():
    with pytest.raises(ValueError):
        poly([-1, 1], 1, [1, 1])
    with pytest.raises(ValueError):
        poly([1, 1], 0, [1, 1])
    with pytest.raises(ValueError):
        poly([1, 1], 1, [1, -1])
    with pytest.raises(ValueError):
        poly([1, 1], 1, [1, 1, 1])


def test_contains_and_origin():
    P = poly([1, 1], 1, [1, 1])
    assert P.contains(np.zeros(2))
    assert P.contains([0.5, 0.5])
    assert not P.contains([0.6, 0.6])
    assert not P.contains([-0.1, 0])
    with pytest.raises(ValueError):
        P.contains([0.1])


# projection -------------------------------------------------------------------


@pytest.mark.parametrize(
    "x, c, b, ubar, expected",
    [
        ((1, 1), (1, 1), 1, (1, 1), (0.5, 0.5)),
        ((0.2, 0.3), (1, 1), 1, (1, 1), (0.2, 0.3)),
        ((2, -1), (1, 1), 2, (1, 1), (1, 0)),
    ],
)
def test_project_examples(x, c, b, ubar, expected):
    np.testing.assert_allclose(project(np.array(x, float), poly(c, b, ubar)), expected, atol=1e-10)


def test_project_dimension_mismatch():
    with pytest.raises(ValueError):
        project(np.ones(3), poly([1, 1], 1, [1, 1]))


@settings(max_examples=200, deadline=None)
@given(P=polytopes(), data=st.data())
def test_project_feasible_and_idempotent(P, data):
    x = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=P.dim, max_size=P.dim)))
    y = project(x, P)
    assert P.contains(y)
    np.testing.assert_allclose(project(y, P), y, atol=1e-9)


def _qp_oracle(x, P):
    # independent solver: SLSQP on the same QP
    cons = [{"type": "ineq", "fun": lambda z: P.b - P.c @ z, "jac": lambda z: -P.c}]
    res = minimize(
        lambda z: 0.5 * np.sum((z - x) ** 2),
        np.zeros(P.dim),
        jac=lambda z: z - x,
        bounds=list(zip(np.zeros(P.dim), P.ubar)),
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    return res.x


def test_project_matches_qp_solver():
    rng = np.random.default_rng(3)
    for _ in range(200):
        d = int(rng.integers(1, 7))
        P = BudgetPolytope(rng.uniform(0, 2, d) * (rng.random(d) > 0.2), rng.uniform(0.1, 2), rng.uniform(0, 2, d))
        x = rng.normal(0, 2, d)
        np.testing.assert_allclose(project(x, P), _qp_oracle(x, P), atol=1e-6)


def test_project_optimal_against_grid():
    rng = np.random.default_rng(11)
    axis = np.arange(0, 1.0 + 1e-12, 0.02)
    for d in (1, 2, 3):
        G = np.stack(np.meshgrid(*[axis] * d, indexing="ij"), -1).reshape(-1, d)
        for _ in range(5):
            P = BudgetPolytope(rng.uniform(0.2, 2, d), rng.uniform(0.3, 1.5), np.ones(d))
            V = G[G @ P.c <= P.b]
            x = rng.normal(0.5, 1.0, d)
            dist = np.linalg.norm(project(x, P) - x)
            assert dist <= np.min(np.linalg.norm(V - x, axis=1)) + 1e-8


def test_project_with_free_coordinate():
    P = poly([0, 1], 0.5, [2, 1])
    np.testing.assert_allclose(project(np.array([3.0, 3.0]), P), [2.0, 0.5], atol=1e-12)


# linear maximization ------------------------------------------------------------


def test_lmo_knapsack_example_matches_grid():
    P = poly([1, 2], 2, [1, 1])
    g = np.array([1.0, 3.0])
    v = lmo(g, P)
    np.testing.assert_allclose(v, [0, 1])
    axis = np.linspace(0, 1, 101)
    X = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
    best = np.max((X @ g)[X @ P.c <= P.b + 1e-12])
    assert g @ v == pytest.approx(best, abs=1e-12)
    assert g @ v == pytest.approx(3.0)


def test_lmo_whole_box_and_zero_direction():
    np.testing.assert_allclose(lmo(np.ones(2), poly([1, 1], 2, [1, 1])), [1, 1])
    v = lmo(np.zeros(2), poly([1, 1], 1, [1, 1]))
    np.testing.assert_allclose(v, [1, 0])  # tie goes to the lower index
    assert np.zeros(2) @ v == 0


def test_lmo_rejects_negative_and_mismatch():
    with pytest.raises(ValueError):
        lmo(np.array([1.0, -0.1]), poly([1, 1], 1, [1, 1]))
    with pytest.raises(ValueError):
        lmo(np.ones(3), poly([1, 1], 1, [1, 1]))


def test_lmo_fills_free_coordinates_first():
    v = lmo(np.array([0.0, 5.0]), poly([0, 1], 0.5, [2, 1]))
    np.testing.assert_allclose(v, [2, 0.5])


def test_lmo_beats_random_feasible_points():
    rng = np.random.default_rng(5)
    for t in range(1000):
        d = int(rng.integers(1, 6))
        P = BudgetPolytope(rng.uniform(0, 2, d), rng.uniform(0.1, 2), rng.uniform(0, 2, d))
        g = rng.uniform(0, 1, d)
        v = lmo(g, P)
        assert P.contains(v)
        V = hit_and_run(P, 100, t) if P.ubar.any() else np.zeros((1, d))
        assert np.all(V @ g <= g @ v + 1e-12)


# sampling -------------------------------------------------------------------------


def test_hit_and_run_box_mean_against_rejection_sampling():
    P = poly([1, 1], 2, [1, 1])
    X = hit_and_run(P, 10000, seed=0)
    rng = np.random.default_rng(0)
    R = rng.random((200000, 2))
    oracle = R[R @ P.c <= P.b].mean(axis=0)
    assert np.all(np.abs(X.mean(axis=0) - oracle) <= 0.05)
    np.testing.assert_allclose(X.mean(axis=0), [0.5, 0.5], atol=0.05)


def test_hit_and_run_triangle_mean():
    # rejection oracle for the simplex corner: mean (1/3, 1/3)
    X = hit_and_run(poly([1, 1], 1, [1, 1]), 10000, seed=4)
    np.testing.assert_allclose(X.mean(axis=0), [1 / 3, 1 / 3], atol=0.02)


def test_hit_and_run_feasible_and_deterministic():
    P = poly([0.3, 1.0, 2.0], 1.0, [1.0, 0.0, 2.0])
    X = hit_and_run(P, 500, seed=9)
    assert X.shape == (500, 3)
    assert all(P.contains(x) for x in X)
    assert np.all(X[:, 1] == 0)
    np.testing.assert_array_equal(X, hit_and_run(P, 500, seed=9))
    assert not np.array_equal(X, hit_and_run(P, 500, seed=10))


def test_hit_and_run_degenerate_and_bad_n():
    P = poly([1, 1], 1, [0, 0])
    with pytest.warns(DegeneratePolytopeWarning):
        X = hit_and_run(P, 3, seed=0)
    np.testing.assert_array_equal(X, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        hit_and_run(poly([1], 1, [1]), 0, seed=0)


# joint profiles ----------------------------------------------------------------------


def test_profile_helpers():
    s = np.arange(6, dtype=float)
    np.testing.assert_array_equal(blocks(s, 3, 2), [[0, 1], [2, 3], [4, 5]])
    np.testing.assert_array_equal(block(s, 1, 2), [2, 3])
    np.testing.assert_array_equal(replace_block(s, 2, [9, 9], 2), [0, 1, 2, 3, 9, 9])
    np.testing.assert_array_equal(zero_block(s, 0, 2), [0, 0, 2, 3, 4, 5])
    np.testing.assert_array_equal(s, np.arange(6))  # inputs untouched
    with pytest.raises(ValueError):
        blocks(s, 2, 2)


def test_sample_profiles_feasible():
    sets = [poly([1, 1], 1, [1, 1]), poly([2, 1], 1, [1, 1])]
    S = sample_profiles(sets, 50, seed=1)
    assert S.shape == (50, 4)
    assert all(is_feasible_profile(s, sets) for s in S)
