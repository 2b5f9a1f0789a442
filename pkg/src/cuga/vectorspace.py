"""Feasible-set geometry for box-plus-budget polytopes.

Every strategy set used in this package has the form

    {x : c @ x <= b, 0 <= x <= ubar}

with ``c >= 0`` and ``b > 0``.  Vectors are plain 1-D float arrays; joint
profiles are flat arrays of length ``N * d`` made of ``N`` contiguous player
blocks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
PROJ_TOL = 1e-10
HR_BURN_IN = 100
HR_THIN = 10
HR_CHAINS = 256


class ProjectionError(RuntimeError):
    """The budget multiplier search produced an infeasible point."""


class DegeneratePolytopeWarning(UserWarning):
    pass


def as_vec(x, dim: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.shape[0]}")
    return v


@dataclass(frozen=True, eq=False)
class BudgetPolytope:
    """``{x : c @ x <= b, 0 <= x <= ubar}``."""

    c: np.ndarray
    b: float
    ubar: np.ndarray

    def __post_init__(self):
        c = as_vec(self.c)
        ubar = as_vec(self.ubar, c.shape[0])
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("cost weights must be finite and nonnegative")
        if np.any(ubar < 0) or not np.all(np.isfinite(ubar)):
            raise ValueError("upper bounds must be finite and nonnegative")
        if not self.b > 0:
            raise ValueError("budget must be positive")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "ubar", ubar)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = as_vec(x, self.dim)
        return bool(
            np.all(x >= -tol) and np.all(x <= self.ubar + tol) and self.c @ x <= self.b + tol
        )

    def with_budget(self, b: float) -> "BudgetPolytope":
        return BudgetPolytope(self.c, b, self.ubar)

    def __repr__(self):
        return f"BudgetPolytope(dim={self.dim}, b={self.b})"


def project(x, P: BudgetPolytope) -> np.ndarray:
    """Euclidean projection onto ``P``.

    The KKT conditions give ``clip(x - lam * c, 0, ubar)`` for the smallest
    ``lam >= 0`` that satisfies the budget.  The spend ``c @ clip(...)`` is
    piecewise linear and nonincreasing in ``lam``, so ``lam`` is found
    exactly: evaluate it at the breakpoints, then interpolate inside the
    bracketing segment.
    """
    x = as_vec(x, P.dim)
    y = np.clip(x, 0.0, P.ubar)
    if P.c @ y <= P.b:
        return y

    c, ubar, b = P.c, P.ubar, P.b
    pos = c > 0
    xp, cp, up = x[pos], c[pos], ubar[pos]
    # tiny costs can push a knot to inf; spend reaches b at a finite knot first
    with np.errstate(over="ignore"):
        knots = np.concatenate([(xp - up) / cp, xp / cp])
    knots = np.unique(np.concatenate([[0.0], knots[knots > 0]]))
    spend = np.clip(xp[None, :] - knots[:, None] * cp, 0.0, up) @ cp
    k = int(np.argmax(spend <= b))
    lo, hi = knots[k - 1], knots[k]
    lam = lo + (spend[k - 1] - b) * (hi - lo) / (spend[k - 1] - spend[k])
    out = np.clip(x - lam * c, 0.0, ubar)
    over = c @ out - b
    if over > PROJ_TOL * max(1.0, b):
        raise ProjectionError(f"budget overshoot {over:.3e} after the breakpoint search")
    if over > 0:
        # rounding in the interpolation; pull back onto the budget
        out = np.clip(x - (lam + over / (cp @ cp)) * c, 0.0, ubar)
    return out


def lmo(g, P: BudgetPolytope) -> np.ndarray:
    """Maximize ``g @ v`` over ``P`` (greedy fractional knapsack).

    Free coordinates (``c == 0``) go to their bound first, then the rest in
    decreasing ``g / c`` order; ties go to the lower index.
    """
    g = as_vec(g, P.dim)
    if np.any(g < 0):
        raise ValueError("lmo expects a nonnegative direction; clamp it first")
    c, ubar = P.c, P.ubar
    v = np.zeros(P.dim)
    free = c == 0
    v[free] = ubar[free]

    idx = np.flatnonzero(~free)
    ratio = g[idx] / c[idx]
    order = idx[np.argsort(-ratio, kind="stable")]
    budget = P.b
    for j in order:
        if budget <= 0:
            break
        take = min(ubar[j], budget / c[j])
        v[j] = take
        budget -= take * c[j]
    return v


def interior_point(P: BudgetPolytope) -> np.ndarray:
    spend = P.c @ P.ubar
    t = 0.5 if spend <= P.b else 0.5 * P.b / spend
    return t * P.ubar


def hit_and_run(
    P: BudgetPolytope,
    n: int,
    seed: int,
    burn_in: int = HR_BURN_IN,
    thin: int = HR_THIN,
    chains: int = HR_CHAINS,
) -> np.ndarray:
    """Approximately uniform samples from ``P``, shape ``(n, P.dim)``.

    Up to ``chains`` independent walks run side by side from an interior
    point; each discards ``burn_in`` steps and then keeps every ``thin``-th
    state.  Samples are taken round-robin across chains.  Coordinates with
    ``ubar == 0`` are pinned at zero and the walk runs in the remaining face.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    active = P.ubar > 0
    if not np.any(active):
        warnings.warn("polytope is the single point 0", DegeneratePolytopeWarning, stacklevel=2)
        return np.zeros((n, P.dim))

    rng = np.random.default_rng(seed)
    c, ub, b = P.c[active], P.ubar[active], P.b
    m = c.shape[0]
    n_chains = min(n, chains)
    per_chain = -(-n // n_chains)
    x = np.tile(interior_point(BudgetPolytope(c, b, ub)), (n_chains, 1))

    kept = []
    for step in range(burn_in + per_chain * thin):
        u = rng.standard_normal((n_chains, m))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = -x / u
            z = (ub - x) / u
        up = u > 0
        t_hi = np.min(np.where(up, z, a), axis=1)
        t_lo = np.max(np.where(up, a, z), axis=1)
        cu = u @ c
        slack = np.maximum(b - x @ c, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_cut = slack / cu
        t_hi = np.where(cu > 0, np.minimum(t_hi, t_cut), t_hi)
        t_lo = np.where(cu < 0, np.maximum(t_lo, t_cut), t_lo)
        t = t_lo + rng.random(n_chains) * (t_hi - t_lo)
        x = np.clip(x + t[:, None] * u, 0.0, ub)
        if step >= burn_in and (step - burn_in + 1) % thin == 0:
            kept.append(x)

    out = np.zeros((n, P.dim))
    # (draw, chain) order so the first rows come from distinct chains
    out[:, active] = np.stack(kept).reshape(-1, m)[:n]
    return out


def child_seeds(seed: int, count: int) -> list[int]:
    """Independent integer seeds derived deterministically from ``seed``."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def sample_profiles(sets: list[BudgetPolytope], n: int, seed: int) -> np.ndarray:
    """``n`` joint profiles, each block drawn by hit-and-run from its own set."""
    seeds = child_seeds(seed, len(sets))
    return np.hstack([hit_and_run(P, n, s) for P, s in zip(sets, seeds)])


# joint profiles -----------------------------------------------------------


def blocks(s, N: int, d: int) -> np.ndarray:
    """View of a flat profile as an ``(N, d)`` array."""
    s = as_vec(s, N * d)
    return s.reshape(N, d)


def block(s: np.ndarray, i: int, d: int) -> np.ndarray:
    return s[i * d:(i + 1) * d]


def replace_block(s, i: int, si, d: int) -> np.ndarray:
    """``(s_i', s_{-i})``: copy of ``s`` with player ``i``'s block replaced."""
    out = np.array(s, dtype=float)
    out[i * d:(i + 1) * d] = si
    return out


def zero_block(s, i: int, d: int) -> np.ndarray:
    """``(0, s_{-i})``."""
    out = np.array(s, dtype=float)
    out[i * d:(i + 1) * d] = 0.0
    return out


def is_feasible_profile(s, sets: list[BudgetPolytope], tol: float = FEAS_TOL) -> bool:
    d = sets[0].dim
    return all(P.contains(block(s, i, d), tol) for i, P in enumerate(sets))
