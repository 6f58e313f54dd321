"""Minimum enclosing ball of a (small) subset of a point space.

The solver works on the simplex-constrained dual

    max_x  sum_i x_i G_ii - x^T G x   s.t.  x >= 0, sum(x) = 1

where ``G`` is the Gram matrix of the subset, so it only ever needs dot
products. The optimal value is the squared radius and the center is
``sum_i x_i s_i``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import SolverError, UnsupportedSizeError
from .space import EXPLICIT, PointSpace

_PRUNE = 1e-12
_POLISH_EVERY = 4
ORACLE_ENUM_LIMIT = 16


@dataclass(frozen=True)
class SolverConfig:
    """Frank-Wolfe stopping rule: relative duality gap and iteration cap."""

    tol: float = 1e-10
    max_iter: int = 100_000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True, eq=False)
class Ball:
    """MEB as simplex weights over support point ids plus its squared radius."""

    support: tuple
    weights: np.ndarray = field(repr=False)
    r2: float
    iterations: int = field(default=0, compare=False)

    @property
    def radius(self) -> float:
        return float(np.sqrt(max(self.r2, 0.0)))

    def weight_of(self, i: int) -> float:
        try:
            return float(self.weights[self.support.index(i)])
        except ValueError:
            return 0.0


def _unique_ids(space: PointSpace, ids) -> np.ndarray:
    ids = space.check_ids(np.atleast_1d(np.asarray(ids)))
    if ids.size == 0:
        raise ValueError("cannot compute the MEB of an empty set")
    return np.unique(ids)


def dual_objective(G: np.ndarray, x: np.ndarray) -> float:
    return float(x @ np.diagonal(G) - x @ G @ x)


def _make_ball(ids, x, G, iterations=0) -> Ball:
    x = np.where(x > _PRUNE, x, 0.0)
    x = x / x.sum()
    keep = np.flatnonzero(x)
    w = x[keep]
    Gk = G[np.ix_(keep, keep)]
    r2 = max(0.0, dual_objective(Gk, w))
    w.setflags(write=False)
    return Ball(tuple(int(i) for i in ids[keep]), w, r2, iterations)


def _kkt_weights(G: np.ndarray, d: np.ndarray, idx: np.ndarray):
    """Stationary point of the dual restricted to the face spanned by ``idx``."""
    k = idx.size
    A = np.empty((k + 1, k + 1))
    A[:k, :k] = 2.0 * G[np.ix_(idx, idx)]
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    A[k, k] = 0.0
    rhs = np.append(d[idx], 1.0)
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)) or not np.allclose(A @ sol, rhs, rtol=0, atol=1e-9 * max(1.0, np.abs(rhs).max())):
        return None
    return sol[:k]


def _frank_wolfe(G: np.ndarray, tol: float, max_iter: int):
    m = G.shape[0]
    d = np.diagonal(G).copy()
    x = np.zeros(m)
    if m == 1:
        x[0] = 1.0
        return x, 0, True

    # start on the diameter pair; np.argmax returns the first (smallest ids) maximizer
    D = d[:, None] + d[None, :] - 2.0 * G
    iu, ju = np.triu_indices(m, 1)
    k = int(np.argmax(D[iu, ju]))
    x[iu[k]] = x[ju[k]] = 0.5
    Gx = G @ x
    floor = 1e-14 * max(1.0, float(d.max()))
    last_support = None

    for it in range(1, max_iter + 1):
        g = d - 2.0 * Gx
        f = x @ d - x @ Gx
        gx = g @ x
        s = int(np.argmax(g))
        fw_gap = g[s] - gx
        if fw_gap <= tol * max(f, floor):
            return x, it, True

        active = np.flatnonzero(x > 0)
        if active.size > 1 and (it % _POLISH_EVERY == 0):
            key = tuple(active)
            if key == last_support:
                y = _kkt_weights(G, d, active)
                if y is not None and y.min() > 0:
                    xp = np.zeros(m)
                    xp[active] = y
                    gp = d - 2.0 * (G @ xp)
                    fp = xp @ d - xp @ G @ xp
                    if gp.max() - gp @ xp <= tol * max(fp, floor) and fp >= f:
                        return xp, it, True
            last_support = key

        v = int(active[np.argmin(g[active])])
        away_gap = gx - g[v]
        if fw_gap >= away_gap:
            direction = -x.copy()
            direction[s] += 1.0
            step_max = 1.0
            Gd = G[:, s] - Gx
        else:
            direction = x.copy()
            direction[v] -= 1.0
            step_max = x[v] / (1.0 - x[v])
            Gd = Gx - G[:, v]
        slope = g @ direction
        curv = direction @ Gd
        step = step_max if curv <= 0 else min(step_max, slope / (2.0 * curv))
        x = x + step * direction
        Gx = Gx + step * Gd
        if fw_gap < away_gap and step == step_max:
            x[v] = 0.0
        np.maximum(x, 0.0, out=x)
    return x, max_iter, False


def solve_meb(space: PointSpace, ids: Sequence[int], config: Optional[SolverConfig] = None) -> Ball:
    """Minimum enclosing ball of the points ``ids`` (duplicates merged).

    Raises
    ------
    SolverError
        If ``config.max_iter`` is reached first; the best iterate is
        attached as ``exc.ball``.
    """
    config = config or DEFAULT_CONFIG
    u = _unique_ids(space, ids)
    G = space.block(u, u)
    x, iters, ok = _frank_wolfe(G, config.tol, config.max_iter)
    ball = _make_ball(u, x, G, iters)
    if not ok:
        raise SolverError(
            f"MEB solver did not reach tol={config.tol:g} in {config.max_iter} iterations",
            ball)
    return ball


class BallCache:
    """Memoized :func:`solve_meb` keyed by the set of unique ids.

    Results are a pure function of the id set, so the cache never changes
    semantics. ``maxsize=None`` keeps everything.
    """

    def __init__(self, space: PointSpace, config: Optional[SolverConfig] = None,
                 maxsize: Optional[int] = None):
        self.space = space
        self.config = config or DEFAULT_CONFIG
        self.maxsize = maxsize
        self._store = {}
        self.hits = 0
        self.misses = 0

    def __call__(self, ids) -> Ball:
        key = tuple(sorted(set(int(i) for i in ids)))
        ball = self._store.get(key)
        if ball is not None:
            self.hits += 1
            return ball
        self.misses += 1
        ball = solve_meb(self.space, key, self.config)
        if self.maxsize is not None and len(self._store) >= self.maxsize:
            self._store.pop(next(iter(self._store)))
        self._store[key] = ball
        return ball

    def __len__(self):
        return len(self._store)


# --- exact oracle ----------------------------------------------------------

def _certify(space, u, G, idx, x, rtol=1e-8):
    """Accept ``x`` on ``u[idx]`` only if it satisfies the MEB optimality conditions."""
    if x is None or x.min() < -1e-12:
        return None
    x = np.clip(x, 0.0, None)
    if x.sum() <= 0:
        return None
    full = np.zeros(u.size)
    full[idx] = x / x.sum()
    ball = _make_ball(u, full, G)
    d2 = space.dist2_many(u, ball)
    slack = rtol * max(1.0, ball.r2)
    if d2.max() > ball.r2 + slack:
        return None
    on = np.array([space.dist2(i, ball) for i in ball.support])
    if np.abs(on - ball.r2).max() > slack:
        return None
    return ball


def _affine_rank(G: np.ndarray) -> int:
    n = G.shape[0]
    J = np.eye(n) - 1.0 / n
    ev = np.linalg.eigvalsh(J @ G @ J)
    return int(np.sum(ev > 1e-10 * max(1.0, ev.max(initial=0.0))))


def _enumerate(space, u, G):
    d = np.diagonal(G)
    n = u.size
    best = None
    for size in range(1, min(n, _affine_rank(G) + 1) + 1):
        for T in itertools.combinations(range(n), size):
            idx = np.array(T)
            y = np.ones(1) if size == 1 else _kkt_weights(G, d, idx)
            if y is None or y.min() < -1e-12:
                continue
            full = np.zeros(n)
            full[idx] = np.clip(y, 0.0, None)
            r2 = dual_objective(G, full / full.sum())
            if best is not None and r2 >= best[0]:
                continue
            d2 = d - 2.0 * (G @ full) + full @ G @ full
            if d2.max() <= r2 * (1 + 1e-9) + 1e-12:
                best = (r2, full)
    if best is None:
        raise SolverError("subset enumeration found no enclosing ball")
    return _make_ball(u, best[1], G)


def _embedding(space, u, G):
    if space.kind == EXPLICIT:
        return space.X[u]
    w, V = np.linalg.eigh(G)
    keep = w > 1e-12 * max(1.0, w.max())
    return V[:, keep] * np.sqrt(w[keep])


def _socp_oracle(space, u, G):
    import cvxpy as cp

    P = _embedding(space, u, G)
    shift = P.mean(axis=0)
    scale = max(1e-300, float(np.abs(P - shift).max()))
    Q = (P - shift) / scale
    z = cp.Variable(Q.shape[1])
    r = cp.Variable()
    prob = cp.Problem(cp.Minimize(r), [cp.norm(Q - z[None, :], 2, axis=1) <= r])
    prob.solve(solver=cp.CLARABEL)
    if z.value is None:
        raise SolverError(f"conic solver failed: {prob.status}")
    dist2 = ((Q - z.value[None, :]) ** 2).sum(axis=1)
    r2 = float(dist2.max())
    d = np.diagonal(G)
    cand = np.flatnonzero(dist2 >= r2 * (1 - 1e-4))
    # drop the most negative multiplier until the face is optimal
    while cand.size:
        y = np.ones(1) if cand.size == 1 else _kkt_weights(G, d, cand)
        if y is None:
            break
        if y.min() >= -1e-12:
            ball = _certify(space, u, G, cand, y)
            if ball is not None:
                return ball
            break
        cand = np.delete(cand, int(np.argmin(y)))
    raise SolverError("could not certify the conic solution as an exact MEB")


def meb_oracle(space: PointSpace, ids: Sequence[int]) -> Ball:
    """Exact MEB by an independent route, for verification only.

    Up to 16 unique points: enumerate every candidate support set and solve
    its circumsphere system. Explicit spaces of any size (and kernel spaces
    up to a few thousand points, through an eigen-embedding of their Gram
    matrix): solve the primal second-order cone program, then snap to the
    exact support by solving the optimality conditions and certifying them.
    """
    u = _unique_ids(space, ids)
    G = space.block(u, u)
    if u.size == 1:
        return _make_ball(u, np.ones(1), G)
    if u.size <= ORACLE_ENUM_LIMIT:
        return _enumerate(space, u, G)
    if space.kind == EXPLICIT or u.size <= 2000:
        return _socp_oracle(space, u, G)
    raise UnsupportedSizeError(
        f"oracle cannot handle {u.size} points in a {space.kind} space")
