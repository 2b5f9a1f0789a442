"""Maximization dynamics: simultaneous online gradient ascent, Frank-Wolfe, baselines."""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .functions import SocialFunction
from .games import ContinuousGame, EmpiricalDistribution, UnsupportedGameError
from .vectorspace import BudgetPolytope, lmo, project, sample_profiles

STEP_RULES = ("fw_1_over_K", "oga_1_over_sqrtK")
GRAD_BOUND_SAMPLES = 100
GRID_LIMIT = 10**7


@dataclass(frozen=True)
class RunConfig:
    K: int
    seed: int = 0
    step_rule: str = "oga_1_over_sqrtK"
    step_scale: float = 1.0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if not self.step_scale > 0:
            raise ValueError("step_scale must be positive")


@dataclass
class Trace:
    """Per-iteration record of a dynamics run; row ``k`` is the profile after update ``k``."""

    profiles: np.ndarray
    gamma: np.ndarray
    payoffs: np.ndarray
    time_ms: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.profiles.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.profiles[-1]

    @property
    def average_profile(self) -> np.ndarray:
        return self.profiles.mean(axis=0)

    @property
    def mean_gamma(self) -> float:
        return float(self.gamma.mean())

    def write_csv(self, path) -> None:
        N = self.payoffs.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "gamma"] + [f"payoff_{i + 1}" for i in range(N)] + ["time_ms"])
            for k in range(len(self)):
                w.writerow([k + 1, repr(float(self.gamma[k]))] + [repr(float(p)) for p in self.payoffs[k]]
                           + [f"{self.time_ms[k]:.4f}"])

    def write_snapshots(self, path, every: int) -> None:
        """Profile lines ``profile <iter> <coords...>`` every ``every`` iterations."""
        with open(path, "w") as fh:
            fh.write("cuga-instance 1\nkind profiles\n")
            for k in range(every - 1, len(self), every):
                fh.write(f"profile {k + 1} " + " ".join(repr(float(v)) for v in self.profiles[k]) + "\n")


def gradient_bounds(game: ContinuousGame, n: int = GRAD_BOUND_SAMPLES, seed: int = 0) -> np.ndarray:
    """Per-player estimate of the largest own-block gradient norm over the strategy space."""
    S = game.sample(n, seed)
    return np.max([np.linalg.norm(game.own_gradients(s), axis=1) for s in S], axis=0)


def d_no_regret(game: ContinuousGame, cfg: RunConfig) -> Trace:
    """Every player runs projected online gradient ascent on its own payoff.

    All players start at 0 and update from the same snapshot.  Player ``i``
    uses the constant step ``step_scale * D_i / (G_i * sqrt(K))`` with
    ``D_i = ||xbar_i||`` and ``G_i`` a sampled gradient-norm bound.
    """
    if game.payoff_grad is None and game.payoff_grads is None:
        raise UnsupportedGameError(f"{game.name}: payoffs have no own-block gradient")
    if cfg.step_rule != "oga_1_over_sqrtK":
        raise ValueError("d_no_regret uses the oga_1_over_sqrtK step rule")
    N, d, K = game.N, game.d, cfg.K
    D = np.array([np.linalg.norm(P.ubar) for P in game.sets])
    G = gradient_bounds(game, seed=cfg.seed)
    G = np.where(G > 0, G, 1.0)
    steps = cfg.step_scale * D / (G * np.sqrt(K))

    s = np.zeros(game.dim)
    profiles = np.empty((K, game.dim))
    gamma = np.empty(K)
    payoffs = np.empty((K, N))
    times = np.empty(K)
    for k in range(K):
        t0 = time.perf_counter()
        grads = game.own_gradients(s)
        nxt = np.empty_like(s)
        for i, P in enumerate(game.sets):
            sl = slice(i * d, (i + 1) * d)
            nxt[sl] = project(s[sl] + steps[i] * grads[i], P)
        s = nxt
        times[k] = 1e3 * (time.perf_counter() - t0)
        profiles[k] = s
    # bookkeeping outside the timed update
    gamma[:] = game.social.values(profiles)
    payoffs[:] = game.payoff_table(profiles)
    return Trace(profiles, gamma, payoffs, times, {"grad_bound": G, "step": steps, "diameter": D})


def _concat_lmo(g: np.ndarray, sets: list[BudgetPolytope]) -> np.ndarray:
    d = sets[0].dim
    return np.concatenate([lmo(g[i * d:(i + 1) * d], P) for i, P in enumerate(sets)])


def frank_wolfe_iterates(gamma: SocialFunction, sets: list[BudgetPolytope], cfg: RunConfig) -> Iterator[np.ndarray]:
    """Yield ``x_1 .. x_K`` of the fixed-step Frank-Wolfe variant started at 0.

    Each step adds ``v / K`` where ``v`` maximizes the gradient over the
    product of the player sets (one LMO per block).
    """
    if cfg.step_rule != "fw_1_over_K":
        raise ValueError("frank_wolfe uses the fw_1_over_K step rule")
    if cfg.step_scale > 1:
        raise ValueError("step_scale above 1 would leave the feasible set")
    if gamma.dim != sum(P.dim for P in sets):
        raise ValueError("dimension mismatch between gamma and the strategy sets")
    step = cfg.step_scale / cfg.K
    x = np.zeros(gamma.dim)
    warned = False
    for _ in range(cfg.K):
        g = gamma.gradient(x)
        if np.any(g < 0):
            if not warned:
                warnings.warn("negative gradient coordinates clamped to 0", stacklevel=2)
                warned = True
            g = np.maximum(g, 0.0)
        x = x + step * _concat_lmo(g, sets)
        yield x


def frank_wolfe(gamma: SocialFunction, sets: list[BudgetPolytope], cfg: RunConfig) -> np.ndarray:
    x = np.zeros(gamma.dim)
    for x in frank_wolfe_iterates(gamma, sets, cfg):
        pass
    return x


def random_baseline(gamma: SocialFunction, sets: list[BudgetPolytope], n: int, seed: int) -> tuple[np.ndarray, float]:
    """Best of ``n`` hit-and-run joint profiles."""
    S = sample_profiles(sets, n, seed)
    vals = gamma.values(S)
    j = int(np.argmax(vals))
    return S[j], float(vals[j])


def grid_axis(upper: float, resolution: float) -> np.ndarray:
    count = int(np.floor(upper / resolution + 1e-9)) + 1
    ax = np.arange(count) * resolution
    if ax[-1] < upper:
        ax = np.append(ax, upper)
    return ax


def grid_max(gamma: SocialFunction, sets: list[BudgetPolytope], resolution: float, chunk: int = 100_000):
    """Exhaustive maximization over the feasible points of a regular grid.

    Ties go to the last grid point in lexicographic order, which for a
    monotone ``gamma`` is the componentwise-largest maximizer.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    axes = [grid_axis(u, resolution) for P in sets for u in P.ubar]
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape, dtype=object))
    if total > GRID_LIMIT:
        raise ValueError(f"grid has {total} points, limit is {GRID_LIMIT}")
    d = sets[0].dim
    best_x, best_v = None, -np.inf
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), shape)
        X = np.column_stack([a[j] for a, j in zip(axes, idx)])
        ok = np.ones(X.shape[0], dtype=bool)
        for i, P in enumerate(sets):
            ok &= X[:, i * d:(i + 1) * d] @ P.c <= P.b + 1e-12
        X = X[ok]
        if X.shape[0] == 0:
            continue
        vals = gamma.values(X)
        j = len(vals) - 1 - int(np.argmax(vals[::-1]))
        if vals[j] >= best_v:
            best_x, best_v = X[j], float(vals[j])
    return best_x, best_v


def to_distribution(trace: Trace) -> EmpiricalDistribution:
    return EmpiricalDistribution(trace.profiles)


def player_regret(game: ContinuousGame, trace: Trace, i: int, candidates: np.ndarray) -> float:
    """Average regret of player ``i`` against the best fixed strategy among ``candidates``."""
    d = game.d
    S = trace.profiles
    realized = game.payoff_values(i, S).mean()
    best = -np.inf
    for dev in np.atleast_2d(candidates):
        moved = S.copy()
        moved[:, i * d:(i + 1) * d] = dev
        best = max(best, float(game.payoff_values(i, moved).mean()))
    return best - float(realized)


def grid_candidates(P: BudgetPolytope, resolution: float) -> np.ndarray:
    """Feasible grid points of one strategy set (for low-dimensional regret checks)."""
    axes = [grid_axis(u, resolution) for u in P.ubar]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
    return X[X @ P.c <= P.b + 1e-12]
