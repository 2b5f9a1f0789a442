"""Continuous games, valid-utility validation and robust PoA bounds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .functions import (
    BoxRegion,
    PropertyReport,
    SocialFunction,
    _inequality_report,
    check_dr,
    check_monotone,
    combine,
)
from .vectorspace import BudgetPolytope, child_seeds, hit_and_run, lmo, sample_profiles, zero_block


class UnsupportedGameError(TypeError):
    pass


class UndefinedBoundError(ValueError):
    pass


@dataclass(eq=False)
class ContinuousGame:
    """``N`` players with ``d``-dimensional blocks, payoffs and a social function.

    ``payoff_grad(i, s)`` returns the gradient of player ``i``'s payoff with
    respect to its own block; dynamics that need it refuse games without one.
    """

    N: int
    d: int
    sets: list[BudgetPolytope]
    payoff: Callable[[int, np.ndarray], float]
    social: SocialFunction
    payoff_grad: Callable[[int, np.ndarray], np.ndarray] | None = None
    payoff_batch: Callable[[int, np.ndarray], np.ndarray] | None = None
    name: str = "game"
    # all own-block gradients at once, shape (N, d); optional fast path
    payoff_grads: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if len(self.sets) != self.N:
            raise ValueError(f"expected {self.N} strategy sets, got {len(self.sets)}")
        if any(P.dim != self.d for P in self.sets):
            raise ValueError("every strategy set must have dimension d")
        if self.social.dim != self.N * self.d:
            raise ValueError(f"social function has dim {self.social.dim}, expected {self.N * self.d}")

    @property
    def dim(self) -> int:
        return self.N * self.d

    def own_gradients(self, s) -> np.ndarray:
        """Own-block payoff gradients of every player, shape ``(N, d)``."""
        if self.payoff_grads is not None:
            return np.asarray(self.payoff_grads(s), dtype=float)
        if self.payoff_grad is None:
            raise UnsupportedGameError(f"{self.name}: payoffs have no own-block gradient")
        return np.vstack([self.payoff_grad(i, s) for i in range(self.N)])

    def payoffs(self, s) -> np.ndarray:
        return np.array([self.payoff(i, s) for i in range(self.N)])

    def payoff_values(self, i: int, S) -> np.ndarray:
        """Payoff of player ``i`` at each row of ``S``."""
        S = np.atleast_2d(S)
        if self.payoff_batch is not None:
            return np.asarray(self.payoff_batch(i, S), dtype=float)
        return np.array([self.payoff(i, s) for s in S])

    def payoff_table(self, S) -> np.ndarray:
        """All payoffs at each row of ``S``, shape ``(m, N)``."""
        return np.column_stack([self.payoff_values(i, S) for i in range(self.N)])

    def smax(self) -> np.ndarray:
        """Upper corner of the box containing every sum of two outcomes."""
        return 2.0 * np.concatenate([P.ubar for P in self.sets])

    def s_tilde(self) -> BoxRegion:
        return BoxRegion(self.smax())

    def sample(self, n: int, seed: int) -> np.ndarray:
        return sample_profiles(self.sets, n, seed)


@dataclass
class EmpiricalDistribution:
    """Finitely supported distribution over joint profiles (rows of ``profiles``)."""

    profiles: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.profiles = np.atleast_2d(np.asarray(self.profiles, dtype=float))
        k = self.profiles.shape[0]
        if k == 0:
            raise ValueError("empty distribution")
        if self.weights is None:
            self.weights = np.full(k, 1.0 / k)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (k,) or np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative, one per profile")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    def __len__(self):
        return self.profiles.shape[0]

    def expect(self, fn: Callable[[np.ndarray], float]) -> float:
        return float(sum(w * fn(s) for w, s in zip(self.weights, self.profiles)))


@dataclass(frozen=True)
class PoABoundReport:
    kind: str
    parameter: float
    bound: float

    def csv_row(self) -> tuple[str, float, float]:
        return (self.kind, self.parameter, self.bound)


POA_KINDS = ("curvature", "generic", "ratio", "ratio_half")


def poa_bound(kind: str, parameter: float = 1.0) -> PoABoundReport:
    """Robust price-of-anarchy bound for a curvature or submodularity-ratio parameter.

    ``curvature``: 1 + alpha.  ``generic``: 2.  ``ratio``: (1 + eta) / eta.
    ``ratio_half``: same with eta halved, for games that satisfy only
    ``sum_i payoff_i <= 2 * social``.
    """
    if kind not in POA_KINDS:
        raise ValueError(f"unknown bound kind {kind!r}; expected one of {POA_KINDS}")
    if not 0.0 <= parameter <= 1.0:
        raise ValueError("parameter must lie in [0, 1]")
    if kind == "curvature":
        bound = 1.0 + parameter
    elif kind == "generic":
        bound = 2.0
    else:
        if parameter == 0:
            raise UndefinedBoundError(f"{kind} bound needs a positive submodularity ratio")
        p = np.float64(parameter)
        with np.errstate(over="ignore"):
            bound = (1.0 + p) / p if kind == "ratio" else (2.0 + p) / p
        if not np.isfinite(bound):
            raise UndefinedBoundError(f"{kind} bound overflows for parameter {parameter!r}")
    return PoABoundReport(kind, float(parameter), float(bound))


def marginal_game(gamma: SocialFunction, sets: list[BudgetPolytope], name: str = "marginal") -> ContinuousGame:
    """Game whose payoffs are marginal contributions ``gamma(s) - gamma(0, s_-i)``.

    The own-block gradient of each payoff is the matching block of the
    social gradient, so the game supports gradient dynamics.
    """
    N = len(sets)
    if N == 0:
        raise ValueError("need at least one player")
    d = sets[0].dim
    if gamma.dim != N * d:
        raise ValueError(f"social function has dim {gamma.dim}, expected {N * d}")

    def payoff(i, s):
        return gamma(s) - gamma(zero_block(s, i, d))

    def payoff_grad(i, s):
        return gamma.gradient(s)[i * d:(i + 1) * d]

    def payoff_batch(i, S):
        Z = np.array(S, dtype=float)
        Z[:, i * d:(i + 1) * d] = 0.0
        return gamma.values(S) - gamma.values(Z)

    def payoff_grads(s):
        return gamma.gradient(s).reshape(N, d)

    return ContinuousGame(N, d, list(sets), payoff, gamma, payoff_grad, payoff_batch, name, payoff_grads)


def validate_valid_utility(game: ContinuousGame, m: int = 1000, seed: int = 0) -> PropertyReport:
    """Check the three valid-utility conditions by sampling.

    (i) monotone and DR-submodular social function on the doubled box;
    (ii) each payoff is at least the player's marginal contribution;
    (iii) payoffs sum to at most the social value.
    """
    seeds = child_seeds(seed, 4)
    Z = game.s_tilde()
    cond_i = combine("i.monotone_dr", [check_monotone(game.social, Z, m, seeds[0]), check_dr(game.social, Z, m, seeds[1])])

    gamma, N, d = game.social, game.N, game.d
    S = game.sample(m, seeds[2])
    rng = np.random.default_rng(seeds[3])
    players = rng.integers(N, size=m)
    table = game.payoff_table(S)
    pay = table[np.arange(m), players]
    contrib = gamma.values(S) - gamma.values(np.array([zero_block(s, int(i), d) for i, s in zip(players, S)]))
    cond_ii = _inequality_report("ii.payoff_covers_contribution", pay, contrib, {"s": S}, extra={"player": players})

    total = table.sum(axis=1)
    cond_iii = _inequality_report("iii.social_covers_payoffs", gamma.values(S), total, {"s": S})
    return combine("valid_utility", [cond_i, cond_ii, cond_iii])


def check_payoff_sum_bound(game: ContinuousGame, factor: float, m: int = 1000, seed: int = 0) -> PropertyReport:
    """Relaxed condition (iii): ``factor * social(s) >= sum_i payoff_i(s)``."""
    S = game.sample(m, seed)
    total = game.payoff_table(S).sum(axis=1)
    return _inequality_report(f"payoff_sum<={factor:g}*social", factor * game.social.values(S), total, {"s": S})


def smoothness_check(game: ContinuousGame, lam: float, mu: float, m: int = 1000, seed: int = 0) -> PropertyReport:
    """Sampled ``(lam, mu)``-smoothness: ``sum_i pi_i(s*_i, s_-i) >= lam g(s*) - mu g(s)``."""
    a, b = child_seeds(seed, 2)
    S = game.sample(m, a)
    S_star = game.sample(m, b)
    d = game.d
    lhs = np.zeros(m)
    for i in range(game.N):
        dev = S.copy()
        dev[:, i * d:(i + 1) * d] = S_star[:, i * d:(i + 1) * d]
        lhs += game.payoff_values(i, dev)
    rhs = lam * game.social.values(S_star) - mu * game.social.values(S)
    return _inequality_report(f"smooth({lam:g},{mu:g})", lhs, rhs, {"s": S, "s_star": S_star})


def deviation_candidates(P: BudgetPolytope, n: int, seed: int) -> np.ndarray:
    """Hit-and-run samples plus the origin and the LMO vertex of each coordinate direction."""
    verts = [np.zeros(P.dim)] + [lmo(np.eye(P.dim)[j], P) for j in range(P.dim)]
    pts = [np.array(verts)]
    if n > 0:
        pts.append(hit_and_run(P, n, seed))
    return np.unique(np.vstack(pts), axis=0)


def cce_epsilon(game: ContinuousGame, dist: EmpiricalDistribution, deviations_per_player: int = 50, seed: int = 0) -> float:
    """Largest expected gain from a fixed unilateral deviation, over a finite candidate set.

    Only finitely many deviations are tried, so the result is a lower bound
    on the true CCE violation.
    """
    d = game.d
    seeds = child_seeds(seed, game.N)
    W, S = dist.weights, dist.profiles
    eps = -np.inf
    for i in range(game.N):
        current = W @ game.payoff_values(i, S)
        for dev in deviation_candidates(game.sets[i], deviations_per_player, seeds[i]):
            moved = S.copy()
            moved[:, i * d:(i + 1) * d] = dev
            eps = max(eps, float(W @ game.payoff_values(i, moved) - current))
    return eps
