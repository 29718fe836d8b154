import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srrw.errors import ConnectivityError, EdgeListError, GraphError
from srrw.graph import (Graph, complete_graph, cycle_graph, degree, erdos_renyi, largest_connected_component,
                        load_edge_list, path_graph, random_connected_graph, require_connected)


def load(text):
    return load_edge_list(io.StringIO(text))


def test_load_with_comment():
    g = load("# c\n0 1\n1 2")
    assert g.n == 3
    assert g.edge_set() == {(0, 1), (1, 2)}


def test_reversed_duplicate_collapses():
    g = load("0 1\n1 0")
    assert g.n == 2
    assert g.edge_set() == {(0, 1)}


def test_self_loop_rejected_with_line_number():
    with pytest.raises(EdgeListError) as err:
        load("0 0")
    assert err.value.line == 1
    assert "line 1" in str(err.value)


def test_non_integer_token_reports_line():
    with pytest.raises(EdgeListError) as err:
        load("# header\n0 1\n1 x\n")
    assert err.value.line == 3


def test_empty_edge_set_rejected():
    with pytest.raises(EdgeListError):
        load("# only comments\n\n")


def test_crlf_and_blank_lines():
    g = load("0 1\r\n\r\n1 2\r\n")
    assert g.edge_set() == {(0, 1), (1, 2)}


def test_ids_remapped_in_ascending_order():
    g = load("100 7\n7 42\n")
    assert list(g.labels) == [7, 42, 100]
    assert g.edge_set() == {(0, 1), (0, 2)}


def test_optional_weight_and_conflict():
    g = load("0 1 2.5\n1 2\n")
    assert degree(g, 1) == 3.5
    with pytest.raises(EdgeListError):
        load("0 1 2\n1 0 3\n")


def test_lcc_picks_largest_component():
    g = Graph(5, [(0, 1), (2, 3), (3, 4)], [1, 1, 1])
    h = largest_connected_component(g)
    assert h.n == 3
    assert list(h.labels) == [2, 3, 4]
    assert h.edge_set() == {(0, 1), (1, 2)}


def test_lcc_tie_goes_to_smallest_original_id():
    g = load("10 11\n3 4\n")
    h = largest_connected_component(g)
    assert list(h.labels) == [3, 4]


def test_lcc_identity_cases():
    g = path_graph(4)
    assert largest_connected_component(g) is g
    single = Graph(2, [(0, 1)], [1.0])
    assert largest_connected_component(single).edge_set() == {(0, 1)}


def test_degree_examples():
    g = path_graph(3)
    assert degree(g, 1) == 2
    assert degree(g, 0) == 1
    w = Graph(3, [(0, 1), (1, 2)], [2.0, 3.0])
    assert degree(w, 1) == 5
    with pytest.raises(IndexError):
        degree(g, 3)


def test_erdos_renyi_complete_and_deterministic():
    assert erdos_renyi(4, 6, 0).edge_set() == complete_graph(4).edge_set()
    a = erdos_renyi(50, 80, 9)
    b = erdos_renyi(50, 80, 9)
    assert a.edge_set() == b.edge_set()
    assert a.is_connected()


def test_erdos_renyi_large_instance():
    g = erdos_renyi(889, 3927, 1)
    assert g.n <= 889
    assert g.is_connected()


def test_erdos_renyi_infeasible():
    with pytest.raises(GraphError):
        erdos_renyi(4, 7, 0)


def test_graph_rejects_bad_edges():
    with pytest.raises(GraphError):
        Graph(3, [(0, 1), (1, 0)], [1, 1])
    with pytest.raises(GraphError):
        Graph(2, [(0, 0)], [1])
    with pytest.raises(GraphError):
        Graph(2, [(0, 1)], [0.0])


def test_bipartite_and_connectivity():
    assert cycle_graph(4).is_bipartite()
    assert not cycle_graph(5).is_bipartite()
    with pytest.raises(ConnectivityError):
        require_connected(Graph(4, [(0, 1), (2, 3)], [1, 1]))


edge_lists = st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)).filter(lambda e: e[0] != e[1]),
                      min_size=1, max_size=60)


@given(edge_lists, st.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_line_permutation_invariance(edges, rnd):
    lines = [f"{a} {b}" for a, b in edges]
    shuffled = lines[:]
    rnd.shuffle(shuffled)
    g1, g2 = load("\n".join(lines)), load("\n".join(shuffled))
    assert g1.edge_set() == g2.edge_set()
    assert list(g1.labels) == list(g2.labels)


@given(edge_lists)
@settings(max_examples=60, deadline=None)
def test_degree_sum_is_twice_weight_sum(edges):
    g = load("\n".join(f"{a} {b}" for a, b in edges))
    assert g.degrees.sum() == pytest.approx(2 * g.weights.sum())


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_lcc_output_connected(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 25))
    pairs = {(int(a), int(b)) for a, b in rng.integers(0, n, (n, 2)) if a != b}
    if not pairs:
        return
    edges = sorted({(min(a, b), max(a, b)) for a, b in pairs})
    h = largest_connected_component(Graph(n, edges, np.ones(len(edges))))
    assert h.is_connected()


def test_random_connected_graph_is_connected(rng):
    for _ in range(20):
        assert random_connected_graph(int(rng.integers(2, 30)), rng).is_connected()
