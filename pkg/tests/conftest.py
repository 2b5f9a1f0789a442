import numpy as np
import pytest

from cuga.functions import SocialFunction
from cuga.games import marginal_game
from cuga.vectorspace import BudgetPolytope


def tiny_fn(x):
    x = np.asarray(x)
    return x[..., 0] + x[..., 1] - x[..., 0] * x[..., 1]


def tiny_grad(x):
    x = np.asarray(x)
    return np.stack([1 - x[..., 1], 1 - x[..., 0]], axis=-1)


def make_tiny_gamma():
    """x1 + x2 - x1 x2 on [0, 1]^2: monotone DR-submodular, maximum 1 at (1, 1)."""
    return SocialFunction(2, tiny_fn, tiny_grad, vectorized=True, name="tiny")


def unit_interval():
    return BudgetPolytope(np.ones(1), 1.0, np.ones(1))


@pytest.fixture
def tiny_gamma():
    return make_tiny_gamma()


@pytest.fixture
def tiny_game():
    return marginal_game(make_tiny_gamma(), [unit_interval(), unit_interval()], name="tiny")


@pytest.fixture
def unit_triangle():
    return BudgetPolytope(np.ones(2), 1.0, np.ones(2))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
