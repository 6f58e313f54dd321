"""Core-set consensus over a time-varying digraph.

Every node keeps a candidate core-set. Each round, active nodes send their
candidate to their out-neighbors, then each active node starts from the
best candidate it has seen (largest squared radius, ties broken by the
lexicographically smallest sorted id list), pools its own points with all
candidate points, and refines. Radii never decrease, so the network settles
on a common core-set in finitely many rounds when the graph is jointly
strongly connected.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .coreset import CoreSet, best_candidate, coreset_refine, coreset_size
from .exceptions import SolverError
from .meb import BallCache, SolverConfig, meb_oracle
from .netsim import (AlwaysOn, ActivityProcess, GraphProcess, STREAM_INIT,
                     is_strongly_connected, Digraph, stream)
from .space import PointSpace

logger = logging.getLogger(__name__)

TRACE_HEADER = ("t", "node", "r2", "center_norm")


@dataclass(frozen=True)
class NodeState:
    node: int
    local_points: tuple
    candidate: CoreSet


@dataclass(frozen=True)
class Message:
    """A node's candidate core-set as ``(id, input vector, label)`` triples."""

    sender: int
    payload: tuple = field(repr=False)

    @classmethod
    def from_state(cls, state: NodeState, space: PointSpace) -> "Message":
        triples = []
        for i in state.candidate.ids:
            x, label = space.raw(i)
            triples.append((i, x, label))
        return cls(state.node, tuple(triples))

    @property
    def ids(self) -> tuple:
        return tuple(i for i, _, _ in self.payload)


def initial_state(node: int, local_points: Sequence[int], m: int, seed: int = 0) -> NodeState:
    """Node ``node`` starts from its first point repeated ``m`` times, or a
    seeded random ``m``-subset when it holds at least ``m`` points.

    The candidate's ball is filled in on the first call to the cache.
    """
    pts = tuple(int(i) for i in local_points)
    if not pts:
        raise ValueError(f"node {node} holds no points")
    if len(pts) >= m:
        pick = stream(seed, STREAM_INIT, node).choice(len(pts), size=m, replace=False)
        ids = tuple(sorted(pts[k] for k in pick))
    else:
        ids = (pts[0],) * m
    return NodeState(node, pts, CoreSet(ids, None))


def _with_ball(state: NodeState, cache: BallCache) -> NodeState:
    if state.candidate.ball is not None:
        return state
    return NodeState(state.node, state.local_points, CoreSet.from_ids(state.candidate.ids, cache))


def local_routine(space: PointSpace, node: NodeState, inbox: Sequence[Message],
                  config: Optional[SolverConfig] = None,
                  cache: Optional[BallCache] = None) -> NodeState:
    """One local step: pick the best candidate in sight and refine it over the pooled points."""
    cache = cache or BallCache(space, config)
    node = _with_ball(node, cache)
    candidates = [node.candidate]
    pool = set(node.local_points) | set(node.candidate.ids)
    for msg in inbox:
        ids = msg.ids
        pool.update(ids)
        candidates.append(CoreSet.from_ids(ids, cache))
    start = best_candidate(candidates)
    refined = coreset_refine(space, sorted(pool), start, cache=cache)
    return NodeState(node.node, node.local_points, refined)


def detect_consensus(states: Sequence) -> bool:
    """True iff every node holds the same candidate (compared in sorted form)."""
    sets = [tuple(sorted(s.candidate.ids)) if isinstance(s, NodeState) else tuple(sorted(s))
            for s in states]
    return all(s == sets[0] for s in sets)


def fixed_point_check(space: PointSpace, states: Sequence[NodeState],
                      cache: Optional[BallCache] = None) -> bool:
    """Re-run every node's local routine on the final state; True iff nothing changes.

    Each node hears from every other node, which covers any in-neighborhood.
    """
    cache = cache or BallCache(space)
    msgs = [Message.from_state(s, space) for s in states]
    for s in states:
        inbox = [m for m in msgs if m.sender != s.node]
        if local_routine(space, s, inbox, cache=cache).candidate != s.candidate:
            return False
    return True


@dataclass
class Trace:
    """Per-round record of every node's squared radius and center norm.

    Row ``t`` holds the state after round ``t``.
    """

    r2: np.ndarray
    center_norm: np.ndarray
    epsilon: float
    coreset_size: int
    consensus_round: Optional[int] = None
    converged: bool = False
    rounds_run: int = 0
    final: Optional[CoreSet] = None
    states: List[NodeState] = field(default_factory=list)
    quiet_window: Optional[int] = None
    fixed_point_ok: Optional[bool] = None

    @property
    def n_nodes(self) -> int:
        return self.r2.shape[1]

    def is_monotone(self, slack: float = 1e-12) -> bool:
        if self.r2.shape[0] < 2:
            return True
        return bool(np.all(np.diff(self.r2, axis=0) >= -slack))

    def rows(self):
        for t in range(self.r2.shape[0]):
            for i in range(self.r2.shape[1]):
                yield t, i, float(self.r2[t, i]), float(self.center_norm[t, i])

    def to_csv(self, fh=None) -> Optional[str]:
        """Write ``t,node,r2,center_norm`` rows; returns the text when no file is given."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t, i, r2, cn in self.rows():
            w.writerow((t, i, repr(r2), repr(cn)))
        return buf.getvalue() if fh is None else None


def _check_assignment(assignment, n_points: int) -> List[tuple]:
    if isinstance(assignment, Mapping):
        nodes = sorted(assignment)
        if nodes != list(range(len(nodes))):
            raise ValueError("assignment keys must be the node indices 0..n-1")
        parts = [tuple(int(i) for i in assignment[k]) for k in nodes]
    else:
        parts = [tuple(int(i) for i in p) for p in assignment]
    seen = sorted(i for p in parts for i in p)
    if seen != list(range(n_points)):
        raise ValueError("assignment must cover every point id exactly once")
    return parts


def round_robin(n_points: int, n_nodes: int) -> List[tuple]:
    """Point ``k`` goes to node ``k % n_nodes``."""
    if not 1 <= n_nodes <= n_points:
        raise ValueError("need 1 <= n_nodes <= n_points")
    return [tuple(range(j, n_points, n_nodes)) for j in range(n_nodes)]


def run_consensus(space: PointSpace, assignment, graph: GraphProcess,
                  activity: Optional[ActivityProcess] = None, epsilon: float = 0.1,
                  max_rounds: int = 10_000, config: Optional[SolverConfig] = None,
                  seed: int = 0, quiet_rounds: Optional[int] = None,
                  cache: Optional[BallCache] = None, check_fixed_point: bool = True) -> Trace:
    """Simulate core-set consensus until the network agrees or ``max_rounds`` pass.

    Each round ``t``: sample the graph and the active set, every active node
    sends its candidate to its out-neighbors (receivers keep only the latest
    message per sender), then every active node runs :func:`local_routine`
    on its buffered messages. New states are committed together.

    Agreement is declared converged once it has held with no change over a
    quiet period: by default, rounds whose union graph is strongly connected
    and in which every node has been active; ``quiet_rounds`` replaces this
    with a fixed number of rounds. Hitting ``max_rounds`` first returns the
    trace with ``converged=False``.
    """
    activity = activity or AlwaysOn()
    cache = cache or BallCache(space, config)
    parts = _check_assignment(assignment, space.n_points)
    n = len(parts)
    if graph.n != n:
        raise ValueError(f"graph has {graph.n} nodes but the assignment has {n}")
    m = coreset_size(epsilon)

    states = [_with_ball(initial_state(i, p, m, seed), cache) for i, p in enumerate(parts)]
    buffers: List[Dict[int, Message]] = [{} for _ in range(n)]
    r2_rows, cn_rows = [], []
    trace = Trace(np.empty((0, n)), np.empty((0, n)), epsilon, m)

    since = None
    quiet_adj = np.zeros((n, n), dtype=bool)
    quiet_active = np.zeros(n, dtype=bool)
    quiet_len = 0

    for t in range(max_rounds):
        g = graph.sample(t)
        act = activity.active(t, n)
        outgoing = {}
        for i, j in sorted(g.edges):
            if act[i]:
                if i not in outgoing:
                    outgoing[i] = Message.from_state(states[i], space)
                buffers[j][i] = outgoing[i]

        new_states = list(states)
        for i in range(n):
            if not act[i]:
                continue
            inbox = [buffers[i][k] for k in sorted(buffers[i])]
            try:
                new_states[i] = local_routine(space, states[i], inbox, cache=cache)
            except SolverError as exc:
                raise SolverError(f"node {i}, round {t}: {exc}", exc.ball) from exc
            buffers[i].clear()
        changed = any(a.candidate != b.candidate for a, b in zip(new_states, states))
        states = new_states

        r2_rows.append([s.candidate.r2 for s in states])
        cn_rows.append([space.center_norm(s.candidate.ball) for s in states])

        if detect_consensus(states):
            if since is None or changed:
                since = t
                quiet_adj[:] = False
                quiet_active[:] = False
                quiet_len = 0
            else:
                quiet_len += 1
                for i, j in g.edges:
                    quiet_adj[i, j] = True
                quiet_active |= act
            if quiet_rounds is not None:
                done = quiet_len >= quiet_rounds
            else:
                done = (quiet_active.all() and
                        is_strongly_connected(Digraph.from_adjacency(quiet_adj)))
            if done:
                trace.converged = True
                trace.consensus_round = since
                trace.quiet_window = quiet_len
                break
        else:
            since = None
    trace.rounds_run = len(r2_rows)
    trace.r2 = np.asarray(r2_rows, dtype=float).reshape(-1, n)
    trace.center_norm = np.asarray(cn_rows, dtype=float).reshape(-1, n)
    trace.states = states
    if trace.converged:
        trace.final = states[0].candidate
        if check_fixed_point:
            trace.fixed_point_ok = fixed_point_check(space, states, cache)
    else:
        logger.warning("no consensus after %d rounds", trace.rounds_run)
    logger.info("rounds=%d consensus_round=%s cache=%d/%d", trace.rounds_run,
                trace.consensus_round, cache.hits, cache.misses)
    return trace


@dataclass
class VerificationReport:
    max_dist2: float
    r_star2: float
    ratio: float
    epsilon: float
    passed: bool
    coreset_r2: float
    relaxed_passed: bool
    r_star_source: str = "oracle"

    @property
    def bound(self) -> float:
        return (1.0 + self.epsilon) * (1.0 + 1e-6)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "ratio": self.ratio,
            "bound": self.bound,
            "max_dist2": self.max_dist2,
            "r_star2": self.r_star2,
            "r_star_source": self.r_star_source,
            "coreset_r2": self.coreset_r2,
            "relaxed_passed": self.relaxed_passed,
            "epsilon": self.epsilon,
        }

    def __str__(self):
        return f"{'PASS' if self.passed else 'FAIL'}, ratio={self.ratio:.6g}"


def verify_epsilon(space: PointSpace, final: CoreSet, all_ids: Sequence[int], epsilon: float,
                   r_star2: Optional[float] = None,
                   cache: Optional[BallCache] = None) -> VerificationReport:
    """Check that every point lies within ``(1 + epsilon) r_*`` of the core-set's center.

    ``r_*`` comes from :func:`meb_oracle` unless supplied. The report also
    carries the cheaper relaxed test, every point within
    ``r(core-set) / (1 - epsilon)``, which needs no optimum.
    """
    cache = cache or BallCache(space)
    ball = final.ball if final.ball is not None else cache(final.ids)
    all_ids = np.asarray(all_ids)
    max_d2 = float(space.dist2_many(all_ids, ball).max())
    source = "user"
    if r_star2 is None:
        r_star2 = meb_oracle(space, all_ids).r2
        source = "oracle"
    r_star2 = float(r_star2)
    if r_star2 > 0:
        ratio = math.sqrt(max(max_d2, 0.0) / r_star2)
    else:
        ratio = 1.0 if max_d2 <= 1e-12 else math.inf
    passed = ratio <= (1.0 + epsilon) * (1.0 + 1e-6)
    if epsilon < 1:
        relaxed = max_d2 <= ball.r2 / (1.0 - epsilon) ** 2 * (1 + 1e-9) + 1e-12
    else:
        relaxed = True
    return VerificationReport(max_d2, r_star2, ratio, epsilon, passed, ball.r2, relaxed, source)
