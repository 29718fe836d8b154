import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srrw.chain import (ReversibleKernel, build_mhrw, build_srw, compute_spectrum, random_reversible_kernel,
                        slem, verify_dbe, write_kernel_csv, write_spectrum_csv)
from srrw.errors import NonErgodicError, ReversibilityError
from srrw.graph import Graph, complete_graph, cycle_graph, path_graph, random_connected_graph


def test_srw_path_stationary():
    k = build_srw(path_graph(3))
    assert np.allclose(k.mu, [0.25, 0.5, 0.25])


def test_srw_complete_k3():
    k = build_srw(complete_graph(3))
    P = k.dense()
    assert np.allclose(P[~np.eye(3, dtype=bool)], 0.5)
    assert np.allclose(k.mu, 1 / 3)


def test_srw_single_edge_is_periodic():
    k = build_srw(path_graph(2))
    assert np.array_equal(k.dense(), [[0, 1], [1, 0]])
    assert np.allclose(k.mu, 0.5)
    assert not k.is_aperiodic()
    with pytest.raises(NonErgodicError):
        slem(compute_spectrum(k))


def test_mhrw_path_uniform():
    P = build_mhrw(path_graph(3)).dense()
    assert P[0, 1] == 0.5 and P[0, 0] == 0.5
    assert P[1, 2] == 0.5 and P[1, 1] == 0.0


def test_mhrw_regular_graph():
    P = build_mhrw(cycle_graph(6)).dense()
    A = build_srw(cycle_graph(6)).dense()
    assert np.array_equal(P, A)
    assert np.all(np.diag(P) == 0)


def test_mhrw_with_srw_target_is_srw(rng):
    g = random_connected_graph(12, rng)
    srw = build_srw(g)
    mh = build_mhrw(g, g.degrees)
    assert np.allclose(mh.dense(), srw.dense(), atol=1e-15)


def test_mhrw_uniform_matches_min_formula(rng):
    for _ in range(10):
        g = random_connected_graph(int(rng.integers(2, 25)), rng)
        P = build_mhrw(g).dense()
        deg = g.degrees
        for i, j in g.edges:
            expect = min(1 / deg[i], 1 / deg[j])
            assert P[i, j] == expect and P[j, i] == expect


def test_mhrw_target_errors():
    g = path_graph(3)
    with pytest.raises(ValueError):
        build_mhrw(g, [1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        build_mhrw(g, [1.0, 1.0])


def test_verify_dbe_examples():
    P = np.array([[0.5, 0.5], [0.25, 0.75]])
    assert verify_dbe(ReversibleKernel(P, np.array([1 / 3, 2 / 3]))) == pytest.approx(0, abs=1e-17)
    assert verify_dbe(ReversibleKernel(P, np.array([0.5, 0.5]))) == pytest.approx(0.125)


def test_two_state_spectrum(two_state):
    s = compute_spectrum(two_state)
    assert np.allclose(s.eigenvalues, [0, 1], atol=1e-15)
    assert np.allclose(s.left[:, 0], [0.5, -0.5])
    assert np.allclose(s.right[:, 0], [1, -1])


@pytest.mark.parametrize("n", [3, 4, 7])
def test_complete_graph_spectrum(n):
    s = compute_spectrum(build_srw(complete_graph(n)))
    assert np.allclose(s.eigenvalues[:-1], -1 / (n - 1))
    assert s.eigenvalues[-1] == pytest.approx(1.0, abs=1e-12)


def test_slem_values(two_state):
    assert slem(compute_spectrum(two_state)) == pytest.approx(0, abs=1e-15)

    class Fake:
        n = 3
        eigenvalues = np.array([-0.9, 0.3, 1.0])

    assert slem(Fake()) == 0.9


def test_reversibility_failure():
    P = np.array([[0.5, 0.5], [0.25, 0.75]])
    with pytest.raises(ReversibilityError):
        compute_spectrum(ReversibleKernel(P, np.array([0.5, 0.5])))


def test_sparse_representation_above_limit():
    g = cycle_graph(5003)
    k = build_srw(g)
    assert not isinstance(k.P, np.ndarray)
    assert k.row_sum_error() < 1e-12
    assert verify_dbe(k) < 1e-15


def test_lazy_preserves_mu(rng):
    k = build_mhrw(random_connected_graph(8, rng), rng.uniform(0.5, 2, 8))
    lazy = k.lazy(0.3)
    assert np.allclose(lazy.dense(), 0.7 * k.dense() + 0.3 * np.eye(8))
    assert np.allclose(k.mu @ lazy.dense(), k.mu, atol=1e-15)


def test_dump_files(tmp_path, two_state):
    write_kernel_csv(two_state, tmp_path / "k.csv", tmp_path / "mu.csv")
    write_spectrum_csv(compute_spectrum(two_state), tmp_path / "ev.csv", tmp_path / "l.csv", tmp_path / "r.csv")
    assert (tmp_path / "k.csv").read_text().splitlines()[0] == "i,j,p"
    assert len((tmp_path / "ev.csv").read_text().splitlines()) == 3
    assert np.loadtxt(tmp_path / "l.csv", delimiter=",").shape == (2, 2)


def random_kernel(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(int(rng.integers(2, 20)), rng, weighted=bool(seed % 2))
    if seed % 3 == 0:
        return build_srw(g)
    return build_mhrw(g, rng.uniform(0.1, 3.0, g.n))


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_kernel_invariants(seed):
    k = random_kernel(seed)
    P = k.dense()
    assert k.row_sum_error() <= 1e-12
    assert verify_dbe(k) <= 1e-12
    assert np.max(np.abs(k.mu @ P - k.mu)) <= 1e-10
    assert np.all(P[~np.eye(k.n, dtype=bool) & (k.graph.adjacency.toarray() == 0)] == 0)


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_spectrum_invariants(seed):
    k = random_kernel(seed)
    s = compute_spectrum(k)
    assert s.eigenvalues[-1] == pytest.approx(1.0, abs=1e-10)
    assert np.all(np.diff(s.eigenvalues) >= 0)
    assert s.eigenvalues[0] >= -1 - 1e-12
    assert np.allclose(s.left, k.mu[:, None] * s.right, atol=1e-12)
    assert np.max(np.abs(s.left.T @ s.right - np.eye(k.n))) <= 1e-10
    assert np.array_equal(s.right[:, -1], np.ones(k.n))
    assert np.array_equal(s.left[:, -1], k.mu)
    assert np.max(np.abs(s.reconstruct() - k.dense())) <= 1e-8
    # deterministic sign convention
    idx = np.argmax(np.abs(s.right[:, :-1]), axis=0)
    assert np.all(s.right[idx, np.arange(k.n - 1)] > 0)


def test_random_reversible_kernel(rng):
    k = random_reversible_kernel(9, rng)
    assert verify_dbe(k) < 1e-15
    assert k.is_aperiodic()


def test_aperiodicity_from_support_without_graph():
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert not ReversibleKernel(P, np.array([0.5, 0.5])).is_aperiodic()
    g = Graph(3, [(0, 1), (1, 2), (0, 2)], np.ones(3))
    assert build_srw(g).is_aperiodic()
