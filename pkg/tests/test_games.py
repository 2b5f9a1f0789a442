import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cuga.functions import SocialFunction, curvature
from cuga.games import (
    ContinuousGame,
    EmpiricalDistribution,
    UndefinedBoundError,
    UnsupportedGameError,
    cce_epsilon,
    check_payoff_sum_bound,
    deviation_candidates,
    marginal_game,
    poa_bound,
    smoothness_check,
    validate_valid_utility,
)
from cuga.instances import random_budget_game, random_sensor, sensor_alpha
from cuga.vectorspace import BudgetPolytope

from conftest import make_tiny_gamma, unit_interval


def test_marginal_payoff_closed_form(tiny_game):
    rng = np.random.default_rng(0)
    for a, b in rng.random((50, 2)):
        s = np.array([a, b])
        assert tiny_game.payoff(0, s) == pytest.approx(a * (1 - b), abs=1e-15)
        assert tiny_game.payoff(1, s) == pytest.approx(b * (1 - a), abs=1e-15)
        assert tiny_game.payoff(0, np.array([0.0, b])) == 0.0


def test_marginal_batch_and_gradients_match_scalar(tiny_game):
    sc = random_sensor(3, 4, 0.2, seed=0)
    for game in (tiny_game, sc.game):
        S = game.sample(20, 1)
        table = game.payoff_table(S)
        for i in range(game.N):
            np.testing.assert_allclose(table[:, i], [game.payoff(i, s) for s in S], atol=1e-14)
        s = S[3]
        np.testing.assert_allclose(game.own_gradients(s), np.vstack([game.payoff_grad(i, s) for i in range(game.N)]))


def test_marginal_game_rejects_mismatch():
    with pytest.raises(ValueError):
        marginal_game(make_tiny_gamma(), [unit_interval()] * 3)
    with pytest.raises(ValueError):
        marginal_game(make_tiny_gamma(), [])


def test_own_gradients_missing():
    g = ContinuousGame(2, 1, [unit_interval()] * 2, lambda i, s: 0.0, make_tiny_gamma())
    with pytest.raises(UnsupportedGameError):
        g.own_gradients(np.zeros(2))


def test_valid_utility_marginal_and_budget():
    sc = random_sensor(3, 4, 0.2, seed=0)
    rep = validate_valid_utility(sc.game, 500, 0)
    assert rep.holds, rep.to_record()
    assert [c.name for c in rep.children] == ["i.monotone_dr", "ii.payoff_covers_contribution", "iii.social_covers_payoffs"]

    bg = random_budget_game(3, 4, 30, 2, 0.3, seed=0)
    rep = validate_valid_utility(bg.game, 300, 0)
    assert rep.holds, rep.to_record()
    iii = rep.children[2]
    assert abs(iii.margin) <= 1e-12  # condition iii holds with equality


def test_valid_utility_fails_when_everyone_gets_gamma(tiny_gamma):
    game = ContinuousGame(2, 1, [unit_interval()] * 2, lambda i, s: tiny_gamma(s), tiny_gamma)
    rep = validate_valid_utility(game, 300, 0)
    assert not rep.holds
    iii = rep.children[2]
    assert not iii.holds
    s = iii.witness["s"]
    assert 2 * tiny_gamma(s) > tiny_gamma(s) + 1e-9


def test_smoothness():
    sc = random_sensor(3, 4, 0.2, seed=0)
    assert smoothness_check(sc.game, 1.0, sensor_alpha(sc), 1000, 0).holds
    assert smoothness_check(sc.game, 0.0, 0.0, 500, 0).holds
    strong = random_sensor(2, 2, 0.5, seed=0)
    assert not smoothness_check(strong.game, 1.0, 0.0, 1000, 0).holds
    xbar = np.ones(4)
    assert strong.game.payoffs(xbar).sum() < strong.social(xbar) - 1e-9


def test_payoff_sum_bound(tiny_game):
    assert check_payoff_sum_bound(tiny_game, 1.0, 200, 0).holds
    assert check_payoff_sum_bound(tiny_game, 2.0, 200, 0).holds


def test_cce_epsilon_point_masses(tiny_game):
    nash = EmpiricalDistribution(np.array([[1.0, 1.0]]))
    assert cce_epsilon(tiny_game, nash, 50, 0) <= 1e-9
    origin = EmpiricalDistribution(np.array([[0.0, 0.0]]))
    assert cce_epsilon(tiny_game, origin, 50, 0) >= 1 - 1e-9


def test_deviation_candidates_include_vertices():
    P = BudgetPolytope(np.array([1.0, 2.0]), 1.0, np.ones(2))
    C = deviation_candidates(P, 20, 0)
    for v in ([0, 0], [1, 0], [0, 0.5]):
        assert np.any(np.all(np.isclose(C, v), axis=1))
    assert all(P.contains(c) for c in C)


def test_empirical_distribution():
    D = EmpiricalDistribution(np.array([[0.0], [1.0]]), np.array([0.25, 0.75]))
    assert D.expect(lambda s: s[0]) == pytest.approx(0.75)
    assert len(D) == 2
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.zeros((2, 1)), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.zeros((2, 1)), np.array([-0.5, 1.5]))


# bounds ----------------------------------------------------------------------------


def test_poa_examples():
    assert poa_bound("curvature", 0.4013).bound == pytest.approx(1.4013)
    assert poa_bound("curvature", 1.0).bound == poa_bound("generic").bound == 2.0
    assert poa_bound("ratio_half", 2 / 3).bound == pytest.approx(4.0)
    assert poa_bound("ratio", 0.5).bound == pytest.approx(3.0)
    assert poa_bound("ratio", 0.5).csv_row() == ("ratio", 0.5, 3.0)


def test_poa_errors():
    with pytest.raises(UndefinedBoundError):
        poa_bound("ratio", 0.0)
    with pytest.raises(UndefinedBoundError):
        poa_bound("ratio_half", 0.0)
    with pytest.raises(ValueError):
        poa_bound("curvature", 1.5)
    with pytest.raises(ValueError):
        poa_bound("nonsense", 0.5)


@given(st.floats(0.0, 1.0))
def test_poa_invariants(p):
    assert 1 <= poa_bound("curvature", p).bound <= poa_bound("generic").bound
    if p > 0:
        try:
            half = poa_bound("ratio_half", p).bound
        except UndefinedBoundError:
            assert p < 1e-300
            return
        assert poa_bound("ratio", p).bound >= 2 - 1e-12
        assert half >= poa_bound("ratio", p).bound


def test_corollary_bound_on_tiny_game(tiny_game):
    # E_sigma[gamma] >= gamma_best / B for a point mass on the equilibrium
    alpha = curvature(tiny_game.social, tiny_game.s_tilde())
    B = poa_bound("curvature", alpha).bound
    assert tiny_game.social([1.0, 1.0]) >= 1.0 / B
