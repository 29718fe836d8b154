import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_lyapunov

from srrw.asymptotics import (analysis_table, coefficients, covariance_U, covariance_U_fundamental, covariance_V,
                              covariance_V_integral, loewner_gap, reduction_bound, sampling_variance,
                              zero_sum_basis)
from srrw.chain import ReversibleKernel, Spectrum, build_mhrw, build_srw, compute_spectrum, random_reversible_kernel
from srrw.errors import DomainError, HorizonError, NonErgodicError
from srrw.graph import complete_graph, path_graph, random_connected_graph

U2 = np.array([[0.25, -0.25], [-0.25, 0.25]])
G01 = np.array([0.0, 1.0])


@pytest.fixture
def s2(two_state):
    return compute_spectrum(two_state)


def test_U_two_state(s2, two_state):
    assert np.allclose(covariance_U(s2), U2, atol=1e-15)
    assert np.allclose(covariance_U_fundamental(two_state), U2, atol=1e-15)


def test_U_iid_chain(rng):
    mu = rng.dirichlet(np.ones(6))
    k = ReversibleKernel(np.tile(mu, (6, 1)), mu)
    expect = np.diag(mu) - np.outer(mu, mu)
    assert np.allclose(covariance_U(compute_spectrum(k)), expect, atol=1e-13)
    assert np.allclose(covariance_U_fundamental(k), expect, atol=1e-13)


def test_U_non_ergodic():
    k = ReversibleKernel(np.eye(2), np.array([0.5, 0.5]))
    with pytest.raises(NonErgodicError):
        covariance_U(compute_spectrum(k))


def test_V_two_state(s2):
    V = covariance_V(s2, 1.0)
    assert np.allclose(V.matrix, U2 / 3, atol=1e-15)
    assert np.array_equal(covariance_V(s2, 0.0).matrix, covariance_U(s2))
    assert V.in_theory and not covariance_V(s2, -0.25).in_theory


def test_V_large_alpha_bound(rng):
    k = build_srw(random_connected_graph(9, rng)).lazy(0.2)
    s = compute_spectrum(k)
    U = covariance_U(s)
    V = covariance_V(s, 1e3).matrix
    assert np.max(V) <= np.max(U) / (2e3 * (1 + s.eigenvalues[0]))


def test_coefficients_example():
    assert np.allclose(coefficients([0.0, 0.5], 1.0), [1 / 3, 3 / 4])
    # clamped at the -1 boundary
    assert coefficients([-1 - 1e-14], 3.0)[0] == 0.0


def test_integral_matches_closed_form(s2, two_state):
    assert np.max(np.abs(covariance_V_integral(two_state, 1.0) - U2 / 3)) <= 1e-6
    assert np.max(np.abs(covariance_V_integral(two_state, 0.0) - U2)) <= 1e-6
    rng = np.random.default_rng(6)
    k = build_mhrw(random_connected_graph(6, rng))
    V = covariance_V(compute_spectrum(k), 2.0).matrix
    assert np.max(np.abs(covariance_V_integral(k, 2.0) - V)) <= 1e-6


def test_integral_against_lyapunov_solver(rng):
    # the integral solves A V + V A^T + U = 0 with A = J + I/2
    k = random_reversible_kernel(7, rng)
    s = compute_spectrum(k)
    a = 1.5
    n = k.n
    A = 2 * a * np.outer(k.mu, np.ones(n)) - a * k.dense().T - (a + 0.5) * np.eye(n)
    U = covariance_U(s)
    V = solve_continuous_lyapunov(A, -U)
    assert np.max(np.abs(V - covariance_V(s, a).matrix)) <= 1e-12
    assert np.max(np.abs(V - covariance_V_integral(s, a))) <= 1e-9


def test_integral_horizon_error(two_state):
    with pytest.raises(HorizonError) as err:
        covariance_V_integral(two_state, 1.0, horizon=1.0)
    assert err.value.suggested_horizon > 1.0
    covariance_V_integral(two_state, 1.0, horizon=err.value.suggested_horizon)


def test_loewner_examples(s2):
    assert loewner_gap(covariance_V(s2, 1.0), covariance_V(s2, 0.0)) == pytest.approx(1 / 3)
    assert loewner_gap(U2, U2) == 0.0
    Q = zero_sum_basis(5)
    assert np.allclose(Q.T @ Q, np.eye(4)) and np.allclose(Q.sum(axis=0), 0)


def test_loewner_random_pair(rng):
    s = compute_spectrum(random_reversible_kernel(8, rng))
    assert loewner_gap(covariance_V(s, 2.0), covariance_V(s, 1.0)) > 0


def test_sampling_variance_examples(s2):
    # i.i.d. fair coin: variance of the indicator is 1/4
    assert sampling_variance(G01, covariance_V(s2, 0.0)) == pytest.approx(0.25)
    assert sampling_variance(G01, covariance_V(s2, 1.0)) == pytest.approx(0.25 / 3)
    assert sampling_variance(G01, U2 / 3) == pytest.approx(0.25 / 3)
    assert sampling_variance(np.ones(2), covariance_V(s2, 1.0)) == pytest.approx(0, abs=1e-16)


def test_reduction_examples(s2, rng):
    rb = reduction_bound(G01, s2, 1.0)
    assert rb.bound == pytest.approx(1 / 3) and rb.ratio == pytest.approx(1 / 3)
    rb0 = reduction_bound(G01, s2, 0.0)
    assert rb0.bound == pytest.approx(1.0) and rb0.ratio == pytest.approx(1.0)
    s = compute_spectrum(random_reversible_kernel(9, rng))
    g = rng.normal(size=9)
    rb5 = reduction_bound(g, s, 5.0)
    assert rb5.ratio <= rb5.bound + 1e-12
    exact = sampling_variance(g, covariance_V(s, 5.0)) / sampling_variance(g, covariance_V(s, 0.0))
    assert rb5.ratio == pytest.approx(exact, rel=1e-10)
    with pytest.raises(DomainError):
        reduction_bound(np.full(9, 2.0), s, 1.0)


def test_negative_alpha_rejected_when_coefficients_blow_up():
    # lambda = 1/2 and alpha = -0.49 keeps 2 alpha (1 + lambda) + 1 > 0
    s = compute_spectrum(build_srw(complete_graph(3)))
    covariance_V(s, -0.49)
    fake = Spectrum(np.array([0.9, 1.0]), np.array([[0.5, 0.5], [-0.5, 0.5]]),
                    np.array([[1.0, 1.0], [-1.0, 1.0]]), np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        covariance_V(fake, -0.49)


def test_analysis_table_rows(s2):
    rows = analysis_table(s2, [0.0, 1.0], {"index": G01})
    assert len(rows) == 2
    a, gid, var, bound, ratio, gap = rows[1]
    assert (a, gid) == (1.0, "index")
    assert var == pytest.approx(0.25 / 3) and ratio == pytest.approx(1 / 3) and gap == pytest.approx(1 / 3)
    assert np.isnan(rows[0][5])


def random_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    if seed % 2:
        k = random_reversible_kernel(n, rng)
    else:
        k = build_mhrw(random_connected_graph(n, rng), rng.uniform(0.3, 2.0, n)).lazy(0.1)
    return compute_spectrum(k), rng


@given(st.integers(0, 10**6))
@settings(max_examples=200, deadline=None)
def test_ratio_never_exceeds_bound(seed):
    s, rng = random_case(seed)
    for _ in range(5):
        g = rng.normal(size=s.n)
        a = float(rng.choice([0.1, 0.5, 1.0, 3.0, 10.0, 100.0]))
        rb = reduction_bound(g, s, a)
        assert rb.ratio <= rb.bound + 1e-12
        assert 0 < rb.ratio <= 1 + 1e-12


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_monotone_loewner_chain_and_decay(seed):
    s, rng = random_case(seed)
    grid = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0)
    covs = [covariance_V(s, a) for a in grid]
    for lo, hi in zip(covs, covs[1:]):
        assert loewner_gap(hi, lo) > 0
    g = rng.normal(size=s.n)
    base = sampling_variance(g, covs[0])
    cap = base / (2 * (1 + s.eigenvalues[0]))
    for a, V in zip(grid, covs):
        assert a * sampling_variance(g, V) <= cap * (1 + 1e-10) + 1e-15
    for V in covs:
        assert np.allclose(V.matrix, V.matrix.T, atol=1e-14)
        assert np.max(np.abs(V.matrix @ np.ones(s.n))) <= 1e-10
        assert np.linalg.eigvalsh(V.matrix)[0] >= -1e-12


def test_basis_independence_on_degenerate_eigenspace(rng):
    k = build_srw(complete_graph(6))
    s = compute_spectrum(k)
    # eigenvalue -1/5 has multiplicity 5; rotate within it (mu-orthonormal since mu is uniform)
    R, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    left = s.left.copy()
    right = s.right.copy()
    left[:, :5] = left[:, :5] @ R
    right[:, :5] = right[:, :5] @ R
    rotated = Spectrum(s.eigenvalues, left, right, s.mu)
    for a in (0.0, 1.0, 4.0):
        assert np.max(np.abs(covariance_V(rotated, a).matrix - covariance_V(s, a).matrix)) <= 1e-10


def test_path_graph_u_is_fundamental(rng):
    k = build_srw(path_graph(5)).lazy(0.3)
    assert np.allclose(covariance_U(compute_spectrum(k)), covariance_U_fundamental(k), atol=1e-12)
