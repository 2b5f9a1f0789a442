"""Social functions and diminishing-returns diagnostics.

A :class:`SocialFunction` wraps a value map on the nonnegative orthant plus an
optional analytic gradient.  The ``check_*`` functions sample the defining
inequalities (DR, weak DR, group forms, curvature inequality, monotonicity)
and return a :class:`PropertyReport` carrying the worst witness found.
Ratio estimators return sampled *upper* estimates of infima; closed forms for
the concrete instances live in :mod:`cuga.instances`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .vectorspace import as_vec, sample_profiles

ABS_TOL = 1e-9
HESS_TOL = 1e-7
FD_STEP = 1e-6
# second differences of values need a coarser step to stay above roundoff
FD_STEP_VALUES = 1e-4
RATIO_DEN_TOL = 1e-12


class UndefinedCurvatureError(ValueError):
    """A coordinate has zero slope at the origin but not elsewhere."""


@dataclass(eq=False)
class SocialFunction:
    """Evaluable map ``R_+^n -> R`` with ``f(0) == 0``.

    ``fn`` (and ``grad`` if given) take one point of shape ``(n,)``.  When
    ``vectorized`` is set they must also accept a batch of shape ``(m, n)``
    and return ``(m,)`` / ``(m, n)``.
    """

    dim: int
    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    vectorized: bool = False
    name: str = "f"

    def __call__(self, x) -> float:
        return float(self.fn(as_vec(x, self.dim)))

    @property
    def has_gradient(self) -> bool:
        return self.grad is not None

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.vectorized:
            return np.asarray(self.fn(X), dtype=float)
        return np.array([self.fn(x) for x in X])

    def gradient(self, x) -> np.ndarray:
        x = as_vec(x, self.dim)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return fd_gradient(self, x)

    def gradients(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.grad is not None and self.vectorized:
            return np.asarray(self.grad(X), dtype=float)
        return np.array([self.gradient(x) for x in X])


@dataclass(frozen=True, eq=False)
class BoxRegion:
    """``{x : 0 <= x <= zmax}``."""

    zmax: np.ndarray

    def __post_init__(self):
        z = as_vec(self.zmax)
        if np.any(z < 0):
            raise ValueError("zmax must be nonnegative")
        object.__setattr__(self, "zmax", z)

    @property
    def dim(self) -> int:
        return self.zmax.shape[0]

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.random((m, self.dim)) * self.zmax


@dataclass
class PropertyReport:
    name: str
    holds: bool
    samples_used: int
    margin: float = np.inf
    witness: dict | None = None
    children: list["PropertyReport"] = field(default_factory=list)

    def to_record(self) -> str:
        """Plain-text record, one ``key: value`` per line; children indented."""
        lines = [
            f"property: {self.name}",
            f"verdict: {'pass' if self.holds else 'FAIL'}",
            f"samples: {self.samples_used}",
            f"margin: {self.margin:.6g}",
        ]
        if self.witness:
            for key, val in self.witness.items():
                if isinstance(val, np.ndarray):
                    val = " ".join(f"{v:.10g}" for v in val)
                lines.append(f"witness.{key}: {val}")
        for ch in self.children:
            lines.extend("  " + ln for ln in ch.to_record().splitlines())
        return "\n".join(lines)

    def csv_rows(self) -> list[tuple[str, str, float]]:
        """``(condition, verdict, margin)`` rows for this report and its children."""
        rows = [(self.name, "pass" if self.holds else "fail", self.margin)]
        for ch in self.children:
            rows.extend(ch.csv_rows())
        return rows


def combine(name: str, reports: list[PropertyReport]) -> PropertyReport:
    failing = [r for r in reports if not r.holds]
    worst = min(reports, key=lambda r: r.margin)
    return PropertyReport(
        name,
        holds=not failing,
        samples_used=sum(r.samples_used for r in reports),
        margin=worst.margin,
        witness=failing[0].witness if failing else None,
        children=list(reports),
    )


def _inequality_report(name, lhs, rhs, points: dict, tol=ABS_TOL, extra=None) -> PropertyReport:
    # margin < -tol is a violation of lhs >= rhs
    margin = np.asarray(lhs) - np.asarray(rhs)
    j = int(np.argmin(margin))
    worst = float(margin[j])
    holds = worst >= -tol
    witness = None
    if not holds:
        witness = {k: np.array(v[j]) for k, v in points.items()}
        if extra:
            witness.update({k: v[j].item() if hasattr(v[j], "item") else v[j] for k, v in extra.items()})
        witness["lhs"] = float(np.asarray(lhs)[j])
        witness["rhs"] = float(np.asarray(rhs)[j])
        witness["margin"] = worst
    return PropertyReport(name, holds, len(margin), worst, witness)


# finite differences ---------------------------------------------------------


def fd_gradient(f: SocialFunction, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    n = x.shape[0]
    E = h * np.eye(n)
    return (f.values(x + E) - f.values(x - E)) / (2 * h)


def fd_hessian(f: SocialFunction, x) -> np.ndarray:
    """Hessian by central differences of the gradient (or of values if no gradient)."""
    x = as_vec(x, f.dim)
    n = f.dim
    if f.has_gradient:
        E = FD_STEP * np.eye(n)
        H = (f.gradients(x + E) - f.gradients(x - E)) / (2 * FD_STEP)
        return 0.5 * (H + H.T)
    h = FD_STEP_VALUES
    H = np.empty((n, n))
    for j in range(n):
        for k in range(j, n):
            ej = np.zeros(n)
            ek = np.zeros(n)
            ej[j] = h
            ek[k] = h
            pts = np.array([x + ej + ek, x + ej - ek, x - ej + ek, x - ej - ek])
            v = f.values(pts)
            H[j, k] = H[k, j] = (v[0] - v[1] - v[2] + v[3]) / (4 * h * h)
    return H


def gradient_check(f: SocialFunction, Z: BoxRegion, m: int = 100, seed: int = 0) -> float:
    """Largest relative deviation of the analytic gradient from central differences."""
    if not f.has_gradient:
        raise ValueError(f"{f.name} has no analytic gradient")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in Z.sample(rng, m):
        g = f.gradient(x)
        g_fd = fd_gradient(f, x)
        scale = max(np.max(np.abs(g)), 1e-12)
        worst = max(worst, float(np.max(np.abs(g - g_fd)) / scale))
    return worst


# property checks ----------------------------------------------------------


def _ordered_pairs(rng, Z: BoxRegion, m: int):
    y = Z.sample(rng, m)
    x = y * rng.random(y.shape)
    return x, y


def check_monotone(f: SocialFunction, Z: BoxRegion, m: int = 1000, seed: int = 0) -> PropertyReport:
    """Sample ``x <= y`` in ``Z`` and test ``f(x) <= f(y)``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = np.random.default_rng(seed)
    x, y = _ordered_pairs(rng, Z, m)
    return _inequality_report("monotone", f.values(y), f.values(x), {"x": x, "y": y})


def _coordinate_tuples(rng, Z: BoxRegion, m: int, equal_coordinate: bool):
    x, y = _ordered_pairs(rng, Z, m)
    rows = np.arange(m)
    i = rng.integers(Z.dim, size=m)
    if equal_coordinate:
        x[rows, i] = y[rows, i]
    k = rng.random(m) * (Z.zmax[i] - y[rows, i])
    step = np.zeros_like(x)
    step[rows, i] = k
    return x, y, i, k, step


def _hessian_report(name, f, Z, m, rng, select) -> PropertyReport:
    pts = Z.sample(rng, m)
    worst, wit = -np.inf, None
    for x in pts:
        H = fd_hessian(f, x)
        vals = select(H)
        j = int(np.argmax(vals))
        if vals[j] > worst:
            worst, wit = float(vals[j]), (x, j)
    holds = worst <= HESS_TOL
    witness = None
    if not holds:
        witness = {"x": wit[0], "entry": wit[1], "hessian_entry": worst}
    return PropertyReport(name, holds, m, HESS_TOL - worst, witness)


def check_dr(f: SocialFunction, Z: BoxRegion, m: int = 1000, seed: int = 0) -> PropertyReport:
    """DR-submodularity: sampled coordinate inequality plus Hessian sign spot checks."""
    rng = np.random.default_rng(seed)
    x, y, i, k, step = _coordinate_tuples(rng, Z, m, equal_coordinate=False)
    lhs = f.values(x + step) - f.values(x)
    rhs = f.values(y + step) - f.values(y)
    ineq = _inequality_report("dr.inequality", lhs, rhs, {"x": x, "y": y}, extra={"i": i, "k": k})
    hess = _hessian_report("dr.hessian", f, Z, m, rng, lambda H: H.ravel())
    return combine("dr", [ineq, hess])


def check_weak_dr(f: SocialFunction, Z: BoxRegion, m: int = 1000, seed: int = 0) -> PropertyReport:
    """Weak DR along coordinates where ``x`` and ``y`` agree, plus its group form."""
    rng = np.random.default_rng(seed)
    x, y, i, k, step = _coordinate_tuples(rng, Z, m, equal_coordinate=True)
    lhs = f.values(x + step) - f.values(x)
    rhs = f.values(y + step) - f.values(y)
    coord = _inequality_report("weak_dr.inequality", lhs, rhs, {"x": x, "y": y}, extra={"i": i, "k": k})

    xg, yg = _ordered_pairs(rng, Z, m)
    agree = rng.random(xg.shape) < 0.5
    xg = np.where(agree, yg, xg)
    z = np.where(agree, rng.random(xg.shape) * (Z.zmax - yg), 0.0)
    lhs = f.values(xg + z) - f.values(xg)
    rhs = f.values(yg + z) - f.values(yg)
    group = _inequality_report("weak_dr.group", lhs, rhs, {"x": xg, "y": yg, "z": z})
    return combine("weak_dr", [coord, group])


def check_group_dr(f: SocialFunction, Z: BoxRegion, m: int = 1000, seed: int = 0) -> PropertyReport:
    """``f(x+z) - f(x) >= f(y+z) - f(y)`` for ``x <= y`` and ``z >= 0`` inside ``Z``."""
    rng = np.random.default_rng(seed)
    x, y = _ordered_pairs(rng, Z, m)
    z = rng.random(x.shape) * (Z.zmax - y)
    lhs = f.values(x + z) - f.values(x)
    rhs = f.values(y + z) - f.values(y)
    return _inequality_report("group_dr", lhs, rhs, {"x": x, "y": y, "z": z})


def check_playerwise_dr(
    f: SocialFunction, N: int, d: int, Z: BoxRegion, m: int = 1000, seed: int = 0
) -> PropertyReport:
    """DR-submodularity of ``f`` within each player's block, others held fixed."""
    if f.dim != N * d:
        raise ValueError(f"function has dim {f.dim}, expected N*d = {N * d}")
    rng = np.random.default_rng(seed)

    def diagonal_blocks(H):
        return np.concatenate([H[i * d:(i + 1) * d, i * d:(i + 1) * d].ravel() for i in range(N)])

    rep = _hessian_report("playerwise_dr", f, Z, m, rng, diagonal_blocks)
    if rep.witness is not None:
        j = rep.witness["entry"]
        player, rest = divmod(j, d * d)
        rep.witness["player"] = player
        rep.witness["block_entry"] = divmod(rest, d)
    return rep


def check_curvature_inequality(
    f: SocialFunction, Z: BoxRegion, alpha: float, m: int = 1000, seed: int = 0
) -> PropertyReport:
    """``f(x+y) - f(x) >= (1 - alpha) (f(y) - f(0))`` for ``x + y`` in ``Z``."""
    rng = np.random.default_rng(seed)
    s = Z.sample(rng, m)
    x = s * rng.random(s.shape)
    y = s - x
    f0 = f(np.zeros(f.dim))
    lhs = f.values(s) - f.values(x)
    rhs = (1.0 - alpha) * (f.values(y) - f0)
    return _inequality_report("curvature_inequality", lhs, rhs, {"x": x, "y": y})


# curvature -----------------------------------------------------------------


def curvature(f: SocialFunction, Z: BoxRegion) -> float:
    """Curvature of a monotone DR-submodular ``f`` over the box ``Z``.

    The gradient of such a function is antitone, so the infimum of the
    slope ratio is reached at ``zmax``.
    """
    g0 = f.gradient(np.zeros(f.dim))
    gz = f.gradient(Z.zmax)
    flat = g0 <= RATIO_DEN_TOL
    if np.any(flat & (np.abs(gz) > RATIO_DEN_TOL)):
        bad = np.flatnonzero(flat & (np.abs(gz) > RATIO_DEN_TOL)).tolist()
        raise UndefinedCurvatureError(f"zero slope at the origin but not at zmax for coordinates {bad}")
    if np.any(flat):
        warnings.warn(f"skipping {int(flat.sum())} coordinates with zero slope at the origin", stacklevel=2)
    if np.all(flat):
        return 0.0
    ratio = np.min(gz[~flat] / g0[~flat])
    return float(np.clip(1.0 - ratio, 0.0, 1.0))


def curvature_grid(f: SocialFunction, Z: BoxRegion, grid_step: float, k_small: float = 1e-4) -> float:
    """Brute-force curvature from finite increments over a grid of ``Z`` (dim <= 4)."""
    n = f.dim
    if n > 4:
        raise ValueError("curvature_grid is a low-dimensional oracle (dim <= 4)")
    axes = [np.append(np.arange(0.0, zi, grid_step), zi) for zi in Z.zmax]
    f0 = f(np.zeros(n))
    best = np.inf
    for i in range(n):
        den = f(k_small * np.eye(n)[i]) - f0
        if den < RATIO_DEN_TOL:
            warnings.warn(f"coordinate {i}: increment at the origin below {RATIO_DEN_TOL}; skipped", stacklevel=2)
            continue
        ax = list(axes)
        ax[i] = np.unique(np.clip(axes[i], 0.0, Z.zmax[i] - k_small))
        X = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, n)
        step = np.zeros(n)
        step[i] = k_small
        best = min(best, float(np.min((f.values(X + step) - f.values(X)) / den)))
    if not np.isfinite(best):
        return 0.0
    return 1.0 - best


# ratios --------------------------------------------------------------------


def submodularity_ratio_at(f: SocialFunction, x, y) -> float:
    """Single-pair ratio ``sum_i [f(x + y_i e_i) - f(x)] / [f(x + y) - f(x)]``."""
    x, y = as_vec(x, f.dim), as_vec(y, f.dim)
    fx = f(x)
    num = np.sum(f.values(x + np.diag(y)) - fx)
    return float(num / (f(x + y) - fx))


def submodularity_ratio(f: SocialFunction, Z: BoxRegion, m: int = 1000, seed: int = 0) -> float:
    """Sampled estimate of the submodularity ratio, capped at 1.

    The minimum over finitely many pairs can only overestimate the true
    infimum.  Pairs with a vanishing denominator are skipped.
    """
    rng = np.random.default_rng(seed)
    s = Z.sample(rng, m)
    x = s * rng.random(s.shape)
    y = s - x
    fx = f.values(x)
    den = f.values(s) - fx
    best = 1.0
    for j in np.flatnonzero(den >= RATIO_DEN_TOL):
        num = np.sum(f.values(x[j] + np.diag(y[j])) - fx[j])
        best = min(best, num / den[j])
    return float(best)


def generalized_ratio_at(gamma: SocialFunction, N: int, d: int, s, s2) -> float:
    """``sum_i [gamma(s_i + s2_i, s_-i) - gamma(s)] / [gamma(s + s2) - gamma(s)]``."""
    s, s2 = as_vec(s, N * d), as_vec(s2, N * d)
    shifted = np.tile(s, (N, 1))
    for i in range(N):
        shifted[i, i * d:(i + 1) * d] += s2[i * d:(i + 1) * d]
    gs = gamma(s)
    return float(np.sum(gamma.values(shifted) - gs) / (gamma(s + s2) - gs))


def generalized_submodularity_ratio(game, m: int = 1000, seed: int = 0) -> float:
    """Sampled estimate of the player-block submodularity ratio of ``game.social``.

    Outcome pairs are drawn from the joint strategy space by hit-and-run.
    Like :func:`submodularity_ratio`, the result is an upper estimate.
    """
    gamma, N, d = game.social, game.N, game.d
    a, b = np.random.SeedSequence(seed).generate_state(2)
    S = sample_profiles(game.sets, m, int(a))
    S2 = sample_profiles(game.sets, m, int(b))
    gs = gamma.values(S)
    den = gamma.values(S + S2) - gs
    best = 1.0
    for j in np.flatnonzero(den >= RATIO_DEN_TOL):
        shifted = np.tile(S[j], (N, 1))
        for i in range(N):
            shifted[i, i * d:(i + 1) * d] += S2[j, i * d:(i + 1) * d]
        num = np.sum(gamma.values(shifted) - gs[j])
        best = min(best, num / den[j])
    return float(best)
