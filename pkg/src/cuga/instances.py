"""Concrete games: continuous budget allocation and sensor coverage.

Products of ``(1 - p) ** s`` factors are evaluated in log space.  Market
activation probabilities equal to 1 are allowed and short-circuit to certain
activation as soon as any mass is placed on the edge; gradients and
curvature bounds are undefined there and raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from pathlib import Path

import numpy as np
from scipy import sparse

from .functions import SocialFunction
from .games import ContinuousGame, marginal_game
from .vectorspace import BudgetPolytope, as_vec


# budget allocation -----------------------------------------------------------


@dataclass(eq=False)
class Market:
    """Bipartite channel/customer graph with per-advertiser edge probabilities.

    Edge ``e`` joins customer ``edge_t[e]`` to channel ``edge_r[e]``;
    ``probs[i, e]`` is advertiser ``i``'s activation probability on it.
    """

    N: int
    d: int
    T: int
    edge_t: np.ndarray
    edge_r: np.ndarray
    probs: np.ndarray
    _logq: list = field(init=False, repr=False)
    _certain: list | None = field(init=False, repr=False)

    def __post_init__(self):
        self.edge_t = np.asarray(self.edge_t, dtype=np.int64)
        self.edge_r = np.asarray(self.edge_r, dtype=np.int64)
        self.probs = np.atleast_2d(np.asarray(self.probs, dtype=float))
        E = self.edge_t.shape[0]
        if self.edge_r.shape != (E,) or self.probs.shape != (self.N, E):
            raise ValueError("edge arrays and probability table disagree in shape")
        if E and (self.edge_t.min() < 0 or self.edge_t.max() >= self.T):
            raise ValueError("customer index out of range")
        if E and (self.edge_r.min() < 0 or self.edge_r.max() >= self.d):
            raise ValueError("channel index out of range")
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        pairs = self.edge_t * self.d + self.edge_r
        if np.unique(pairs).shape[0] != E:
            raise ValueError("duplicate (customer, channel) edge")

        certain = self.probs >= 1.0
        with np.errstate(divide="ignore"):
            logq = np.where(certain, 0.0, np.log1p(-np.minimum(self.probs, 1.0)))
        shape = (self.T, self.d)
        self._logq = [sparse.csr_matrix((logq[i], (self.edge_t, self.edge_r)), shape=shape) for i in range(self.N)]
        self._certain = None
        if certain.any():
            self._certain = [
                sparse.csr_matrix((certain[i].astype(float), (self.edge_t, self.edge_r)), shape=shape)
                for i in range(self.N)
            ]

    @property
    def n_edges(self) -> int:
        return self.edge_t.shape[0]

    @property
    def has_certain_edges(self) -> bool:
        return self._certain is not None

    def log_survival(self, S: np.ndarray) -> np.ndarray:
        """``log(1 - P_i(s_i, t))`` for every advertiser and customer, shape ``(N, T)``."""
        L = np.vstack([self._logq[i] @ S[i] for i in range(self.N)])
        if self._certain is not None:
            hit = np.vstack([self._certain[i] @ (S[i] > 0).astype(float) for i in range(self.N)])
            L[hit > 0] = -np.inf
        return L

    def require_uncertain(self, what: str):
        if self._certain is not None:
            raise ValueError(f"{what} is undefined when some activation probability equals 1")


@dataclass(eq=False)
class BudgetAllocationGame:
    """Advertisers splitting budgets over channels to activate customers."""

    market: Market
    sets: list[BudgetPolytope]

    def __post_init__(self):
        if len(self.sets) != self.market.N or any(P.dim != self.market.d for P in self.sets):
            raise ValueError("need one d-dimensional strategy set per advertiser")

    @property
    def N(self) -> int:
        return self.market.N

    @property
    def d(self) -> int:
        return self.market.d

    @cached_property
    def social(self) -> SocialFunction:
        return SocialFunction(
            self.N * self.d,
            lambda s: budget_social(self, s),
            lambda s: budget_gradient(self, s),
            name="budget_allocation",
        )

    @cached_property
    def game(self) -> ContinuousGame:
        return ContinuousGame(
            self.N, self.d, self.sets, lambda i, s: budget_payoff(self, i, s), self.social, name="budget_allocation"
        )


def _split(game, s) -> np.ndarray:
    return as_vec(s, game.N * game.d).reshape(game.N, game.d)


def activation_prob(game: BudgetAllocationGame, i: int, s_i, t: int) -> float:
    """Probability that advertiser ``i`` alone activates customer ``t``."""
    mk = game.market
    s_i = as_vec(s_i, mk.d)
    if np.any(s_i < 0):
        raise ValueError("allocations must be nonnegative")
    on_t = mk.edge_t == t
    r, p = mk.edge_r[on_t], mk.probs[i, on_t]
    alloc = s_i[r]
    if np.any((p >= 1.0) & (alloc > 0)):
        return 1.0
    live = p < 1.0
    return float(-np.expm1(np.sum(alloc[live] * np.log1p(-p[live]))))


def budget_social(game: BudgetAllocationGame, s) -> float:
    """Expected number of activated customers."""
    L = game.market.log_survival(_split(game, s))
    return float(np.sum(-np.expm1(L.sum(axis=0))))


def budget_gradient(game: BudgetAllocationGame, s) -> np.ndarray:
    mk = game.market
    mk.require_uncertain("the budget-allocation gradient")
    L = mk.log_survival(_split(game, s))
    Q = np.exp(L.sum(axis=0))
    return -np.concatenate([mk._logq[i].T @ Q for i in range(mk.N)])


def elementary_symmetric(q: np.ndarray) -> np.ndarray:
    """``e_0..e_n`` of the rows of ``q`` (shape ``(n, T)``), returned as ``(n + 1, T)``."""
    n = q.shape[0]
    e = np.zeros((n + 1,) + q.shape[1:])
    e[0] = 1.0
    for j in range(n):
        e[1:j + 2] = e[1:j + 2] + q[j] * e[0:j + 1]
    return e


def predecessor_survival(q: np.ndarray, i: int) -> np.ndarray:
    """Average over uniformly random orders of the product of ``q_j`` over players before ``i``.

    The predecessor set has a uniform size ``k`` in ``0..N-1`` and is a
    uniform ``k``-subset of the others, which gives
    ``(1/N) * sum_k e_k(q_-i) / C(N-1, k)``.
    """
    N = q.shape[0]
    e = elementary_symmetric(np.delete(q, i, axis=0))
    w = np.array([1.0 / comb(N - 1, k) for k in range(N)])
    return np.tensordot(w, e, axes=1) / N


def budget_payoff(game: BudgetAllocationGame, i: int, s) -> float:
    """Expected customers activated by advertiser ``i`` under random attempt orders."""
    L = game.market.log_survival(_split(game, s))
    q = np.exp(L)
    return float(np.sum(-np.expm1(L[i]) * predecessor_survival(q, i)))


def budget_curvature_bound(game: BudgetAllocationGame) -> float:
    """Closed-form curvature of the activation objective over the doubled box."""
    mk = game.market
    mk.require_uncertain("the curvature bound")
    smax = 2.0 * np.vstack([P.ubar for P in game.sets])
    Q2 = np.exp(mk.log_survival(smax).sum(axis=0))
    best = np.inf
    for i in range(mk.N):
        den = np.asarray(mk._logq[i].sum(axis=0)).ravel()
        num = mk._logq[i].T @ Q2
        ok = den < 0
        if ok.any():
            best = min(best, float(np.min(num[ok] / den[ok])))
    if not np.isfinite(best):
        raise ValueError("curvature undefined: every activation probability is zero")
    return 1.0 - best


def random_market(N: int, d: int, T: int, edges_per_customer: int, p_max: float, seed: int) -> Market:
    """Random market with ``edges_per_customer`` distinct channels per customer.

    Probabilities are uniform on ``[0.8, 1] * p_max``.  For a fixed seed the
    edge sets are nested in ``edges_per_customer`` and the probabilities scale
    linearly in ``p_max``, so parameter sweeps compare like with like.
    """
    if not 1 <= edges_per_customer <= d:
        raise ValueError("edges_per_customer must lie in [1, d]")
    if not 0 <= p_max <= 1:
        raise ValueError("p_max must lie in [0, 1]")
    s_order, s_prob, _ = np.random.SeedSequence(seed).spawn(3)
    keys = np.random.default_rng(s_order).random((T, d))
    chan = np.argsort(keys, axis=1)[:, :edges_per_customer]
    u = np.random.default_rng(s_prob).random((N, T, d), dtype=np.float32)[:, :, :edges_per_customer]
    probs = p_max * (0.8 + 0.2 * u.astype(float).reshape(N, -1))
    edge_t = np.repeat(np.arange(T), edges_per_customer)
    return Market(N, d, T, edge_t, chan.ravel(), probs)


def random_budget_game(
    N: int, d: int, T: int, edges_per_customer: int, p_max: float, seed: int, b: float = 1.0
) -> BudgetAllocationGame:
    """Random market plus costs uniform on ``[0, 1]``, budget ``b`` and unit box."""
    market = random_market(N, d, T, edges_per_customer, p_max, seed)
    s_cost = np.random.SeedSequence(seed).spawn(3)[2]
    costs = np.random.default_rng(s_cost).random((N, d))
    return BudgetAllocationGame(market, [BudgetPolytope(costs[i], b, np.ones(d)) for i in range(N)])


# sensor coverage -------------------------------------------------------------


def _check_detect(detect, N, d):
    detect = np.asarray(detect, dtype=float)
    if detect.shape != (N, d):
        raise ValueError(f"detection table must have shape ({N}, {d})")
    if np.any(detect < 0) or np.any(detect >= 1):
        raise ValueError("detection probabilities must lie in [0, 1)")
    return detect


@dataclass(eq=False)
class SensorCoverage:
    """Sensors spreading effort over locations with constant event weights."""

    N: int
    d: int
    detect: np.ndarray
    weights: np.ndarray
    sets: list[BudgetPolytope]

    def __post_init__(self):
        self.detect = _check_detect(self.detect, self.N, self.d)
        self.weights = as_vec(self.weights, self.d)
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        if len(self.sets) != self.N:
            raise ValueError("need one strategy set per sensor")

    @cached_property
    def rates(self) -> np.ndarray:
        return -np.log1p(-self.detect)

    @property
    def xbar(self) -> np.ndarray:
        return np.vstack([P.ubar for P in self.sets])

    @cached_property
    def social(self) -> SocialFunction:
        return SocialFunction(
            self.N * self.d,
            lambda x: sensor_social(self, x),
            lambda x: sensor_gradient(self, x),
            vectorized=True,
            name="sensor_coverage",
        )

    @cached_property
    def game(self) -> ContinuousGame:
        return marginal_game(self.social, self.sets, name="sensor_coverage")

    def with_budget(self, b: float) -> "SensorCoverage":
        return SensorCoverage(self.N, self.d, self.detect, self.weights, [P.with_budget(b) for P in self.sets])


def _exposure(sc, x):
    X = np.asarray(x, dtype=float)
    X = X.reshape(X.shape[:-1] + (sc.N, sc.d))
    return X, np.sum(sc.rates * X, axis=-2)


def detection_prob(sc, x) -> np.ndarray:
    """Joint detection probability per location (last axis of length ``d``)."""
    _, E = _exposure(sc, x)
    return -np.expm1(-E)


def sensor_social(sc: SensorCoverage, x) -> np.ndarray | float:
    _, E = _exposure(sc, x)
    out = np.sum(sc.weights * -np.expm1(-E), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def sensor_gradient(sc: SensorCoverage, x) -> np.ndarray:
    X, E = _exposure(sc, x)
    G = sc.weights[..., None, :] * sc.rates * np.exp(-E)[..., None, :]
    return G.reshape(X.shape[:-2] + (sc.N * sc.d,))


def sensor_alpha(sc: SensorCoverage) -> float:
    """Curvature over the doubled box: the largest detection probability at ``2 * xbar``."""
    return float(np.max(detection_prob(sc, 2.0 * sc.xbar.ravel())))


def random_sensor(N: int, d: int, p: float, seed: int, b: float = 1.0) -> SensorCoverage:
    """Uniform detection ``p``, costs uniform on ``[1, 3] / d``, unit box, normalized weights."""
    rng = np.random.default_rng(seed)
    costs = rng.uniform(1.0 / d, 3.0 / d, size=(N, d))
    w = rng.random(d)
    w /= w.sum()
    sets = [BudgetPolytope(costs[i], b, np.ones(d)) for i in range(N)]
    return SensorCoverage(N, d, np.full((N, d), p), w, sets)


@dataclass(eq=False)
class AffineWeightSensorCoverage:
    """Sensor coverage whose location weights grow with average effort.

    ``w_r(x) = a_r * sum_i x_ir / N + b_r``.
    """

    N: int
    d: int
    detect: np.ndarray
    a: np.ndarray
    b: np.ndarray
    sets: list[BudgetPolytope]

    def __post_init__(self):
        self.detect = _check_detect(self.detect, self.N, self.d)
        self.a = as_vec(self.a, self.d)
        self.b = as_vec(self.b, self.d)
        if np.any(self.a < 0):
            raise ValueError("slopes a_r must be nonnegative")
        if len(self.sets) != self.N:
            raise ValueError("need one strategy set per sensor")

    @cached_property
    def rates(self) -> np.ndarray:
        return -np.log1p(-self.detect)

    @property
    def xbar(self) -> np.ndarray:
        return np.vstack([P.ubar for P in self.sets])

    @cached_property
    def social(self) -> SocialFunction:
        return SocialFunction(
            self.N * self.d,
            lambda x: affine_sensor_social(self, x),
            lambda x: affine_sensor_gradient(self, x),
            vectorized=True,
            name="affine_sensor_coverage",
        )

    @cached_property
    def game(self) -> ContinuousGame:
        return marginal_game(self.social, self.sets, name="affine_sensor_coverage")


def random_affine_sensor(N: int, d: int, p: float, a, b, seed: int, budget: float = 1.0) -> AffineWeightSensorCoverage:
    """Affine-weight counterpart of :func:`random_sensor` (same costs for the same seed).

    ``a`` and ``b`` are scalars or per-location arrays.
    """
    base = random_sensor(N, d, p, seed, budget)
    a = np.broadcast_to(np.asarray(a, dtype=float), (d,)).copy()
    b = np.broadcast_to(np.asarray(b, dtype=float), (d,)).copy()
    return AffineWeightSensorCoverage(N, d, base.detect, a, b, base.sets)


def affine_sensor_social(asc: AffineWeightSensorCoverage, x):
    X, E = _exposure(asc, x)
    w = asc.a * X.sum(axis=-2) / asc.N + asc.b
    out = np.sum(w * -np.expm1(-E), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def affine_sensor_gradient(asc: AffineWeightSensorCoverage, x) -> np.ndarray:
    X, E = _exposure(asc, x)
    w = asc.a * X.sum(axis=-2) / asc.N + asc.b
    P = -np.expm1(-E)
    G = (asc.a * P / asc.N)[..., None, :] + (w * np.exp(-E))[..., None, :] * asc.rates
    return G.reshape(X.shape[:-2] + (asc.N * asc.d,))


def affine_sensor_eta(asc: AffineWeightSensorCoverage) -> float:
    """Lower bound on the player-block submodularity ratio.

    Each location contributes ``b_r / (b_r + sum_{j != i} a_r xbar_jr / N)``,
    minimized over players; the denominator grows with effort so the box
    corner gives the infimum.
    """
    if np.any(asc.b <= 0):
        raise ValueError("the ratio formula needs b_r > 0 at every location")
    others = asc.xbar.sum(axis=0)[None, :] - asc.xbar
    return float(np.min(asc.b / (asc.b + asc.a * others / asc.N)))


# instance files --------------------------------------------------------------

FORMAT_HEADER = "cuga-instance 1"


def _fmt(vals) -> str:
    return " ".join(repr(float(v)) for v in vals)


def _set_lines(sets):
    return [f"set {i} {float(P.b)!r} c {_fmt(P.c)} ubar {_fmt(P.ubar)}" for i, P in enumerate(sets)]


def dumps_instance(inst) -> str:
    """Plain-text instance description (see README for the line grammar)."""
    if isinstance(inst, BudgetAllocationGame):
        mk = inst.market
        lines = [FORMAT_HEADER, "kind budget", f"N {mk.N}", f"d {mk.d}", f"T {mk.T}"]
        for e in range(mk.n_edges):
            for i in range(mk.N):
                lines.append(f"edge {mk.edge_t[e]} {mk.edge_r[e]} {i} {float(mk.probs[i, e])!r}")
    elif isinstance(inst, (SensorCoverage, AffineWeightSensorCoverage)):
        kind = "sensor" if isinstance(inst, SensorCoverage) else "affine_sensor"
        lines = [FORMAT_HEADER, f"kind {kind}", f"N {inst.N}", f"d {inst.d}"]
        for i in range(inst.N):
            for r in range(inst.d):
                lines.append(f"detect {i} {r} {float(inst.detect[i, r])!r}")
        if kind == "sensor":
            lines += [f"weight {r} {float(w)!r}" for r, w in enumerate(inst.weights)]
        else:
            lines += [f"affine {r} {float(inst.a[r])!r} {float(inst.b[r])!r}" for r in range(inst.d)]
    else:
        raise TypeError(f"cannot serialize {type(inst).__name__}")
    lines += _set_lines(inst.sets)
    return "\n".join(lines) + "\n"


def loads_instance(text: str):
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or " ".join(lines[0]) != FORMAT_HEADER:
        raise ValueError("missing instance header")
    head, rows = {}, {}
    for parts in lines[1:]:
        key = parts[0]
        if key in ("kind", "N", "d", "T"):
            head[key] = parts[1]
        else:
            rows.setdefault(key, []).append(parts[1:])
    kind, N, d = head["kind"], int(head["N"]), int(head["d"])

    sets = [None] * N
    for parts in rows.get("set", []):
        i, b = int(parts[0]), float(parts[1])
        cut = parts.index("ubar")
        sets[i] = BudgetPolytope(np.array(parts[3:cut], float), b, np.array(parts[cut + 1:], float))

    if kind == "budget":
        index, et, er, probs = {}, [], [], []
        for t, r, i, p in rows.get("edge", []):
            key = (int(t), int(r))
            if key not in index:
                index[key] = len(et)
                et.append(key[0])
                er.append(key[1])
                probs.append(np.zeros(N))
            probs[index[key]][int(i)] = float(p)
        P = np.array(probs).T if probs else np.zeros((N, 0))
        return BudgetAllocationGame(Market(N, d, int(head["T"]), et, er, P), sets)

    detect = np.zeros((N, d))
    for i, r, p in rows.get("detect", []):
        detect[int(i), int(r)] = float(p)
    if kind == "sensor":
        w = np.zeros(d)
        for r, val in rows.get("weight", []):
            w[int(r)] = float(val)
        return SensorCoverage(N, d, detect, w, sets)
    if kind == "affine_sensor":
        a, b = np.zeros(d), np.zeros(d)
        for r, ar, br in rows.get("affine", []):
            a[int(r)], b[int(r)] = float(ar), float(br)
        return AffineWeightSensorCoverage(N, d, detect, a, b, sets)
    raise ValueError(f"unknown instance kind {kind!r}")


def save_instance(inst, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def load_instance(path):
    return loads_instance(Path(path).read_text())
