"""Time-varying directed communication graphs and node activity.

Randomness follows one splitting scheme everywhere: the generator for
purpose ``k`` at round ``t`` is

    numpy.random.Generator(PCG64(SeedSequence(root_seed, spawn_key=(k, t))))

so any round can be replayed on its own, and graph sampling, node activity
and initialization draw from independent streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

STREAM_GRAPH = 0
STREAM_ACTIVITY = 1
STREAM_INIT = 2
STREAM_DATA = 3


def stream(seed: int, purpose: int, t: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, t)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(t)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Digraph:
    """Directed graph on nodes ``0..n-1``; edge ``(i, j)`` means i transmits to j."""

    n: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a digraph needs at least one node")
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) outside 0..{self.n - 1}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> "Digraph":
        return cls(int(n), frozenset((int(i), int(j)) for i, j in edges))

    @classmethod
    def from_adjacency(cls, A) -> "Digraph":
        A = np.asarray(A, dtype=bool)
        rows, cols = np.nonzero(A)
        return cls.from_edges(A.shape[0], zip(rows.tolist(), cols.tolist()))

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            A[i, j] = True
        return A

    def in_neighbors(self, j: int) -> list:
        return sorted(i for i, k in self.edges if k == j)

    def out_neighbors(self, i: int) -> list:
        return sorted(k for h, k in self.edges if h == i)

    def union(self, other: "Digraph") -> "Digraph":
        if other.n != self.n:
            raise ValueError("cannot unite digraphs with different node counts")
        return Digraph(self.n, self.edges | other.edges)


def strongly_connected_components(g: Digraph) -> list:
    """Strongly connected components as sorted node lists, ordered by smallest member."""
    rows = [i for i, _ in g.edges]
    cols = [j for _, j in g.edges]
    A = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n, g.n))
    _, labels = connected_components(A, directed=True, connection="strong")
    comps = {}
    for node, lab in enumerate(labels):
        comps.setdefault(lab, []).append(node)
    return sorted(comps.values())


def is_strongly_connected(g: Digraph) -> bool:
    return len(strongly_connected_components(g)) == 1


class GraphProcess:
    """Deterministic map from round ``t`` to a :class:`Digraph`."""

    n: int

    def sample(self, t: int) -> Digraph:
        raise NotImplementedError

    def spec(self) -> str:
        raise NotImplementedError


class ErdosRenyi(GraphProcess):
    """Each ordered pair ``(i, j)``, ``i != j``, is an edge with probability ``p``, fresh every round."""

    def __init__(self, n: int, p: float, seed: int = 0):
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        self.n, self.p, self.seed = int(n), float(p), int(seed)

    def sample(self, t: int) -> Digraph:
        if t < 0:
            raise ValueError("t must be non-negative")
        A = stream(self.seed, STREAM_GRAPH, t).random((self.n, self.n)) < self.p
        np.fill_diagonal(A, False)
        return Digraph.from_adjacency(A)

    def spec(self) -> str:
        return f"er:{self.p!r}"

    def __repr__(self):
        return f"ErdosRenyi(n={self.n}, p={self.p}, seed={self.seed})"


class FixedRing(GraphProcess):
    """Directed cycle ``0 -> 1 -> ... -> n-1 -> 0`` at every round."""

    def __init__(self, n: int):
        self.n = int(n)
        edges = [(i, (i + 1) % self.n) for i in range(self.n)] if self.n > 1 else []
        self._g = Digraph.from_edges(self.n, edges)

    def sample(self, t: int) -> Digraph:
        if t < 0:
            raise ValueError("t must be non-negative")
        return self._g

    def spec(self) -> str:
        return "ring"

    def __repr__(self):
        return f"FixedRing(n={self.n})"


class PeriodicSequence(GraphProcess):
    """Cycles through a fixed list of digraphs: round ``t`` uses ``graphs[t % len(graphs)]``."""

    def __init__(self, graphs: Sequence[Digraph], source: Optional[str] = None):
        if not graphs:
            raise ValueError("need at least one digraph")
        n = graphs[0].n
        if any(g.n != n for g in graphs):
            raise ValueError("all digraphs must share the node count")
        self.n = n
        self.graphs = tuple(graphs)
        self.source = source

    def sample(self, t: int) -> Digraph:
        if t < 0:
            raise ValueError("t must be non-negative")
        return self.graphs[t % len(self.graphs)]

    def spec(self) -> str:
        return f"file:{self.source}" if self.source else "periodic"

    def __repr__(self):
        return f"PeriodicSequence(n={self.n}, period={len(self.graphs)})"


def load_schedule(path, n: Optional[int] = None) -> PeriodicSequence:
    """Read a JSON schedule: a list of rounds, each a list of ``[from, to]`` pairs.

    The schedule repeats once exhausted. ``n`` defaults to one more than the
    largest node index mentioned.
    """
    with open(path) as fh:
        rounds = json.load(fh)
    if not isinstance(rounds, list) or not rounds:
        raise ValueError(f"{path}: expected a non-empty JSON list of rounds")
    for r in rounds:
        if not isinstance(r, list) or any(not isinstance(e, list) or len(e) != 2 for e in r):
            raise ValueError(f"{path}: each round must be a list of [from, to] pairs")
    if n is None:
        n = 1 + max((max(e) for r in rounds for e in r), default=0)
    return PeriodicSequence([Digraph.from_edges(n, [tuple(e) for e in r]) for r in rounds],
                            source=str(path))


def save_schedule(path, graphs: Sequence[Digraph]) -> None:
    with open(path, "w") as fh:
        json.dump([sorted([list(e) for e in g.edges]) for g in graphs], fh)


def sample_graph(process: GraphProcess, t: int) -> Digraph:
    return process.sample(t)


def union_graph(process: GraphProcess, t0: int, window: int) -> Digraph:
    """Edge union of the graphs at rounds ``t0 .. t0 + window - 1``."""
    if window < 1:
        raise ValueError("window must be at least 1")
    edges = set()
    for t in range(t0, t0 + window):
        edges |= process.sample(t).edges
    return Digraph(process.n, frozenset(edges))


def joint_connectivity_window(process: GraphProcess, t0: int, max_window: int) -> Optional[int]:
    """Smallest ``w <= max_window`` whose union from ``t0`` is strongly connected."""
    A = np.zeros((process.n, process.n), dtype=bool)
    for w in range(1, max_window + 1):
        for i, j in process.sample(t0 + w - 1).edges:
            A[i, j] = True
        if is_strongly_connected(Digraph.from_adjacency(A)):
            return w
    return None


class ActivityProcess:
    """Which nodes compute and transmit at round ``t``."""

    def active(self, t: int, n: int) -> np.ndarray:
        raise NotImplementedError


class AlwaysOn(ActivityProcess):
    def active(self, t: int, n: int) -> np.ndarray:
        return np.ones(n, dtype=bool)

    def spec(self) -> str:
        return "on"

    def __repr__(self):
        return "AlwaysOn()"


class BernoulliActive(ActivityProcess):
    """Every node wakes independently with probability ``q`` each round."""

    def __init__(self, q: float, seed: int = 0):
        if not 0 < q <= 1:
            raise ValueError("q must lie in (0, 1]")
        self.q, self.seed = float(q), int(seed)

    def active(self, t: int, n: int) -> np.ndarray:
        return stream(self.seed, STREAM_ACTIVITY, t).random(n) < self.q

    def spec(self) -> str:
        return f"bernoulli:{self.q!r}"

    def __repr__(self):
        return f"BernoulliActive(q={self.q}, seed={self.seed})"


def complete_graph(n: int) -> PeriodicSequence:
    g = Digraph.from_edges(n, [(i, j) for i in range(n) for j in range(n) if i != j])
    return PeriodicSequence([g], source=None)


def parse_graph(text: str, n: int, seed: int = 0) -> GraphProcess:
    """``er:P``, ``ring``, ``complete`` or ``file:PATH``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "er":
        return ErdosRenyi(n, float(arg), seed)
    if kind == "ring":
        return FixedRing(n)
    if kind == "complete":
        return complete_graph(n)
    if kind == "file":
        return load_schedule(arg, n)
    raise ValueError(f"unknown graph spec {text!r}; expected er:P, ring, complete or file:PATH")


def parse_activity(text: str, seed: int = 0) -> ActivityProcess:
    """``on`` or ``bernoulli:Q``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind in ("on", "always"):
        return AlwaysOn()
    if kind == "bernoulli":
        return BernoulliActive(float(arg), seed)
    raise ValueError(f"unknown activity spec {text!r}; expected on or bernoulli:Q")
