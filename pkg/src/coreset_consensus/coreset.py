"""Fixed-size core-sets refined by farthest-point insertion and best removal."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .meb import Ball, BallCache, SolverConfig
from .space import PointSpace

# relative margin a swap must beat; keeps the loop finite under roundoff
IMPROVEMENT_ETA = 1e-9
_TIE_RTOL = 1e-12


def coreset_size(epsilon: float) -> int:
    """``ceil(1 / epsilon)``, robust to ``1 / epsilon`` landing a hair above an integer."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    return max(1, math.ceil(1.0 / epsilon - 1e-9))


@dataclass(frozen=True, eq=False)
class CoreSet:
    """Multiset of point ids of fixed size, kept sorted, with its ball.

    Two core-sets are equal iff their sorted id lists are equal.
    """

    ids: tuple
    ball: Ball = field(repr=False)

    @classmethod
    def from_ids(cls, ids: Sequence[int], cache: BallCache) -> "CoreSet":
        ids = tuple(sorted(int(i) for i in ids))
        if not ids:
            raise ValueError("a core-set needs at least one id")
        return cls(ids, cache(ids))

    @property
    def r2(self) -> float:
        return self.ball.r2

    @property
    def size(self) -> int:
        return len(self.ids)

    def unique_ids(self) -> tuple:
        return tuple(sorted(set(self.ids)))

    def __eq__(self, other):
        if not isinstance(other, CoreSet):
            return NotImplemented
        return self.ids == other.ids

    def __hash__(self):
        return hash(self.ids)

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)


def outranks(a: CoreSet, b: CoreSet) -> bool:
    """Total order on candidates: larger r2 first, then lexicographically smaller ids."""
    if a.r2 != b.r2:
        return a.r2 > b.r2
    return a.ids < b.ids


def best_candidate(candidates: Sequence[CoreSet]) -> CoreSet:
    best = candidates[0]
    for c in candidates[1:]:
        if outranks(c, best):
            best = c
    return best


def _argmax_smallest_id(ids: np.ndarray, values: np.ndarray) -> int:
    top = values.max()
    tied = values >= top - _TIE_RTOL * max(1.0, abs(top))
    return int(ids[tied].min())


def farthest_point(space: PointSpace, P: Sequence[int], ball: Ball) -> int:
    """Id in ``P`` farthest from the center of ``ball``; ties go to the smallest id."""
    ids = np.asarray(sorted(set(int(i) for i in P)), dtype=np.intp)
    if ids.size == 0:
        raise ValueError("P must be non-empty")
    return _argmax_smallest_id(ids, space.dist2_many(ids, ball))


def best_removal(space: PointSpace, C_a: Sequence[int], cache: Optional[BallCache] = None,
                 config: Optional[SolverConfig] = None):
    """Drop the point whose removal leaves the largest ball.

    Every leave-one-out subset of the multiset ``C_a`` is solved. Removing
    any copy of a repeated id gives the same multiset, so each distinct id is
    tried once. Ties go to the smallest id.

    Returns
    -------
    removed : int
    ball : Ball
        MEB of ``C_a`` without ``removed``.
    """
    cache = cache or BallCache(space, config)
    C_a = sorted(int(i) for i in C_a)
    if len(C_a) < 2:
        raise ValueError("C_a needs at least two entries")
    candidates = sorted(set(C_a))
    balls = []
    for p in candidates:
        rest = list(C_a)
        rest.remove(p)
        balls.append(cache(rest))
    r2 = np.array([b.r2 for b in balls])
    removed = _argmax_smallest_id(np.asarray(candidates), r2)
    return removed, balls[candidates.index(removed)]


def coreset_refine(space: PointSpace, P: Sequence[int], C_init: CoreSet,
                   config: Optional[SolverConfig] = None,
                   cache: Optional[BallCache] = None,
                   history: Optional[List[float]] = None) -> CoreSet:
    """Improve ``C_init`` by swaps until no swap strictly grows its radius.

    Each pass takes the point of ``P`` (together with the core-set's own
    points) farthest from the current center, adds it, and removes whichever
    point leaves the largest ball. The swap is kept when the squared radius
    grows by more than a relative ``IMPROVEMENT_ETA``.

    Parameters
    ----------
    history : list, optional
        When given, receives the squared radius of the starting core-set and
        after every accepted swap.
    """
    cache = cache or BallCache(space, config)
    current = C_init if C_init.ball is not None else CoreSet.from_ids(C_init.ids, cache)
    pool = sorted(set(int(i) for i in P) | set(current.ids))
    if not pool:
        raise ValueError("P must be non-empty")
    pool = np.asarray(pool, dtype=np.intp)
    if history is not None:
        history.append(current.r2)

    while True:
        ball = current.ball
        d2 = space.dist2_many(pool, ball)
        a = _argmax_smallest_id(pool, d2)
        threshold = ball.r2 * (1.0 + IMPROVEMENT_ETA)
        # a point already inside the ball cannot enlarge any leave-one-out set
        if d2[np.searchsorted(pool, a)] <= threshold:
            return current
        C_a = list(current.ids) + [a]
        b, new_ball = best_removal(space, C_a, cache)
        if not new_ball.r2 > threshold:
            return current
        C_a.remove(b)
        current = CoreSet(tuple(sorted(C_a)), new_ball)
        if history is not None:
            history.append(current.r2)
