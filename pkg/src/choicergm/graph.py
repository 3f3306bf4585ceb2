"""Fixed-order simple graphs, edge variables and small-support enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Optional

import numpy as np

MAX_ENUMERABLE_EDGES = 30


class SupportTooLargeError(ValueError):
    """Raised when exhaustive enumeration would exceed the state-space guard."""


class EdgeVariable(NamedTuple):
    sender: int
    receiver: int


class Graph:
    """Binary adjacency structure of fixed order.

    Undirected graphs keep both triangle halves in sync, so neighbour scans
    never branch on directedness. Treat instances as values: ``set_edge``
    returns a copy and the adjacency array is marked read-only.
    """

    __slots__ = ("adj", "directed")

    def __init__(self, adj, directed: bool = False):
        a = np.array(adj, dtype=np.uint8, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if np.any(a > 1):
            raise ValueError("adjacency must be binary")
        if np.any(np.diagonal(a)):
            raise ValueError("self-loops are not allowed")
        if not directed and not np.array_equal(a, a.T):
            raise ValueError("undirected adjacency must be symmetric")
        a.setflags(write=False)
        self.adj = a
        self.directed = bool(directed)

    @classmethod
    def empty(cls, n: int, directed: bool = False) -> "Graph":
        return cls(np.zeros((n, n), dtype=np.uint8), directed)

    @classmethod
    def complete(cls, n: int, directed: bool = False) -> "Graph":
        a = np.ones((n, n), dtype=np.uint8)
        np.fill_diagonal(a, 0)
        return cls(a, directed)

    @classmethod
    def from_edges(cls, n: int, edges, directed: bool = False) -> "Graph":
        a = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop ({i}, {j})")
            a[i, j] = 1
            if not directed:
                a[j, i] = 1
        return cls(a, directed)

    @classmethod
    def star(cls, n: int, center: int = 0) -> "Graph":
        return cls.from_edges(n, [(center, k) for k in range(n) if k != center])

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def support(self) -> "GraphSupport":
        return GraphSupport(self.n, self.directed)

    def n_edges(self) -> int:
        total = int(self.adj.sum())
        return total if self.directed else total // 2

    def degrees(self) -> np.ndarray:
        if self.directed:
            return self.adj.sum(axis=0).astype(np.int64) + self.adj.sum(axis=1)
        return self.adj.sum(axis=1).astype(np.int64)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j])

    def edges(self) -> list[EdgeVariable]:
        a = self.adj if self.directed else np.triu(self.adj)
        return [EdgeVariable(int(i), int(j)) for i, j in zip(*np.nonzero(a))]

    def set_edge(self, e, state: int) -> "Graph":
        return set_edge(self, e, state)

    def toggle(self, e) -> "Graph":
        i, j = e
        return set_edge(self, e, 1 - int(self.adj[i, j]))

    def code(self) -> int:
        """Integer whose bit ``k`` is the state of the ``k``-th edge variable."""
        return encode(self.adj, self.directed)

    def copy_adj(self) -> np.ndarray:
        return np.array(self.adj, dtype=np.uint8, copy=True)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.directed == other.directed and np.array_equal(self.adj, other.adj)

    def __hash__(self) -> int:
        return hash((self.directed, self.n, self.adj.tobytes()))

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, {kind}, edges={self.n_edges()})"


@dataclass(frozen=True)
class GraphSupport:
    n: int
    directed: bool = False
    constraint: Optional[Callable[[Graph], bool]] = None

    @property
    def n_edge_variables(self) -> int:
        m = self.n * (self.n - 1)
        return m if self.directed else m // 2

    def contains(self, g: Graph) -> bool:
        if g.n != self.n or g.directed != self.directed:
            return False
        return self.constraint is None or bool(self.constraint(g))


def _check_edge(n: int, directed: bool, e) -> tuple[int, int]:
    i, j = int(e[0]), int(e[1])
    if i == j:
        raise ValueError(f"self-loop ({i}, {j}) is not an edge variable")
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"edge ({i}, {j}) out of range for n={n}")
    if not directed and i > j:
        i, j = j, i
    return i, j


def set_edge(g: Graph, e, state: int) -> Graph:
    i, j = _check_edge(g.n, g.directed, e)
    state = int(bool(state))
    if g.adj[i, j] == state:
        return g
    a = g.copy_adj()
    a[i, j] = state
    if not g.directed:
        a[j, i] = state
    return Graph(a, g.directed)


def edge_variables(support: GraphSupport) -> list[EdgeVariable]:
    n = support.n
    if support.directed:
        return [EdgeVariable(i, j) for i in range(n) for j in range(n) if i != j]
    return [EdgeVariable(i, j) for i, j in itertools.combinations(range(n), 2)]


def edge_index_arrays(n: int, directed: bool) -> tuple[np.ndarray, np.ndarray]:
    """Sender and receiver arrays in ``edge_variables`` order."""
    if directed:
        i, j = np.nonzero(~np.eye(n, dtype=bool))
    else:
        i, j = np.triu_indices(n, k=1)
    return i.astype(np.int64), j.astype(np.int64)


def encode(adj: np.ndarray, directed: bool) -> int:
    i, j = edge_index_arrays(adj.shape[0], directed)
    bits = adj[i, j].astype(bool)
    return sum(1 << k for k in np.flatnonzero(bits).tolist())


def decode(code: int, n: int, directed: bool = False) -> Graph:
    i, j = edge_index_arrays(n, directed)
    a = np.zeros((n, n), dtype=np.uint8)
    for k in range(len(i)):
        if code >> k & 1:
            a[i[k], j[k]] = 1
            if not directed:
                a[j[k], i[k]] = 1
    return Graph(a, directed)


def enumerate_graphs(support: GraphSupport) -> Iterator[Graph]:
    """Yield every graph of the support once, in order of ``Graph.code``."""
    m = support.n_edge_variables
    if m > MAX_ENUMERABLE_EDGES:
        raise SupportTooLargeError(
            f"support has {m} edge variables; enumeration requires at most "
            f"{MAX_ENUMERABLE_EDGES}"
        )
    for code in range(1 << m):
        g = decode(code, support.n, support.directed)
        if support.constraint is None or support.constraint(g):
            yield g
