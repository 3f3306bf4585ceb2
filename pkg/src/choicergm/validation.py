"""Input coercion shared by the estimator and the command line."""

import numpy as np

from .graph import Graph
from .model import NodeData, TermSpec


def check_graph(X, directed=None) -> Graph:
    """Accept a Graph, a square 0/1 array, or a networkx graph."""
    if isinstance(X, Graph):
        if directed is not None and X.directed != directed:
            raise ValueError("graph directedness does not match")
        return X
    if hasattr(X, "nodes") and hasattr(X, "edges") and hasattr(X, "is_directed"):
        nodes = list(X.nodes)
        index = {v: k for k, v in enumerate(nodes)}
        return Graph.from_edges(len(nodes), [(index[a], index[b]) for a, b in X.edges],
                                directed=X.is_directed())
    a = np.asarray(X)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square adjacency matrix, got shape {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("adjacency matrix must be binary")
    if directed is None:
        directed = not np.array_equal(a, a.T)
    return Graph(a.astype(np.uint8), directed)


def check_terms(terms) -> list:
    if isinstance(terms, (str, TermSpec)):
        terms = [terms]
    out = [TermSpec.parse(t) for t in terms]
    if not out:
        raise ValueError("model needs at least one term")
    return out


def check_node_data(d, n: int, directed: bool = False) -> NodeData:
    if d is None:
        d = NodeData()
    elif isinstance(d, dict):
        d = NodeData(**d)
    d.check(n, directed)
    return d
