import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from choicergm.graph import (
    EdgeVariable,
    Graph,
    GraphSupport,
    SupportTooLargeError,
    decode,
    edge_variables,
    encode,
    enumerate_graphs,
    set_edge,
)


def test_set_edge_mirrors_undirected():
    g = set_edge(Graph.empty(3), (0, 1), 1)
    assert g.adj[0, 1] == 1 and g.adj[1, 0] == 1
    assert g.n_edges() == 1


def test_set_edge_to_current_state_is_identity():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    assert set_edge(g, (0, 1), 1) == g
    assert set_edge(g, (0, 2), 0) == g


def test_complete_minus_one_edge():
    assert set_edge(Graph.complete(4), (2, 3), 0).n_edges() == 5


def test_self_loop_rejected():
    with pytest.raises(ValueError):
        set_edge(Graph.empty(3), (1, 1), 1)


def test_graph_validation():
    with pytest.raises(ValueError):
        Graph(np.eye(3, dtype=np.uint8))
    with pytest.raises(ValueError):
        Graph(np.array([[0, 1], [0, 0]]), directed=False)
    with pytest.raises(ValueError):
        Graph(np.array([[0, 2], [2, 0]]))
    Graph(np.array([[0, 1], [0, 0]]), directed=True)


def test_graph_is_immutable():
    g = Graph.complete(3)
    with pytest.raises(ValueError):
        g.adj[0, 1] = 0


def test_edge_variables_order():
    assert edge_variables(GraphSupport(3)) == [(0, 1), (0, 2), (1, 2)]
    assert all(isinstance(e, EdgeVariable) for e in edge_variables(GraphSupport(3)))
    directed = edge_variables(GraphSupport(3, directed=True))
    assert len(directed) == 6 and len(set(directed)) == 6
    assert edge_variables(GraphSupport(1)) == []


@pytest.mark.parametrize("n,directed,count", [(3, False, 8), (4, False, 64), (3, True, 64)])
def test_enumerate_counts_and_uniqueness(n, directed, count):
    gs = list(enumerate_graphs(GraphSupport(n, directed)))
    assert len(gs) == count
    assert len({hash(g) for g in gs}) == count
    assert len(set(gs)) == count


def test_enumerate_refuses_large_support():
    with pytest.raises(SupportTooLargeError, match="30"):
        next(iter(enumerate_graphs(GraphSupport(9))))


def test_support_size():
    assert GraphSupport(5).n_edge_variables == 10
    assert GraphSupport(5, directed=True).n_edge_variables == 20


def test_star_constructor():
    s = Graph.star(5)
    assert s.n_edges() == 4
    assert list(s.degrees()) == [4, 1, 1, 1, 1]


@given(st.integers(0, 63))
def test_encode_decode_roundtrip(code):
    g = decode(code, 4)
    assert encode(g.adj, False) == code
    assert g.code() == code


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(0, 1)), max_size=40),
       st.booleans())
def test_random_walk_keeps_invariants(moves, directed):
    g = Graph.empty(6, directed)
    for i, j, s in moves:
        if i == j:
            continue
        before = g
        g = set_edge(g, (i, j), s)
        # toggling back restores the previous graph
        assert set_edge(g, (i, j), before.adj[i, j]) == before
    a = g.adj
    assert not np.any(np.diag(a))
    if not directed:
        assert np.array_equal(a, a.T)
        assert g.n_edges() == a.sum() // 2
    else:
        assert g.n_edges() == a.sum()
