import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import srrw.ode as ode
from srrw.chain import build_mhrw, build_srw, compute_spectrum
from srrw.errors import DomainError, IntegrationError
from srrw.graph import random_connected_graph
from srrw.ode import drift, integrate, jacobian_at_mu, jacobian_fd, lyapunov, lyapunov_derivative

X = np.array([0.25, 0.75])


def test_drift_examples(two_state):
    assert np.allclose(drift(two_state, X, 1.0), [0.5, -0.5], atol=1e-15)
    assert np.allclose(drift(two_state, X, 0.0), [0.25, -0.25], atol=1e-15)
    assert np.allclose(drift(two_state, two_state.mu, 4.0), 0, atol=1e-16)


def test_lyapunov_example(two_state):
    # r = (2, 2/3), w = (1/4) (r_0 + r_1)^2
    assert lyapunov(two_state, X, 1.0) == pytest.approx(16 / 9, rel=1e-15)
    assert lyapunov(two_state, 3 * X, 1.0) == pytest.approx(16 / 9, rel=1e-15)
    assert lyapunov(two_state, two_state.mu, 2.0) == pytest.approx(1.0)


def test_lyapunov_derivative_example(two_state):
    # grad w = (-32/3, -32/27) for alpha = 1 and h = (1/2, -1/2)
    assert lyapunov_derivative(two_state, X, 1.0) == pytest.approx(-128 / 27, rel=1e-12)
    assert lyapunov_derivative(two_state, two_state.mu, 1.0) == pytest.approx(0, abs=1e-15)
    with pytest.raises(DomainError):
        lyapunov(two_state, [0.0, 1.0], 1.0)


@given(st.integers(0, 10**6), st.sampled_from([0.5, 1.0, 3.0, -0.25]))
@settings(max_examples=60, deadline=None)
def test_lyapunov_derivative_forms_agree(seed, alpha):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(int(rng.integers(2, 15)), rng)
    k = build_mhrw(g, rng.uniform(0.3, 2.0, g.n))
    x = rng.dirichlet(np.ones(k.n))
    d = lyapunov_derivative(k, x, alpha, tol=1e-12)
    if alpha > 0:
        assert d <= 1e-15
    else:
        assert d >= -1e-15


def test_integrate_two_state_converges(two_state):
    traj = integrate(two_state, X, 1.0, T=50)
    assert np.max(np.abs(traj.final - two_state.mu)) <= 1e-8
    assert traj.t_end == 50 and traj.halvings == 0
    assert traj.max_lyapunov_step <= 1e-12


def test_integrate_matches_finer_step(rng):
    k = build_srw(random_connected_graph(6, rng))
    x0 = rng.dirichlet(np.ones(6))
    a = integrate(k, x0, 2.0, T=3.0, dt=0.01).final
    b = integrate(k, x0, 2.0, T=3.0, dt=0.001).final
    assert np.max(np.abs(a - b)) <= 1e-9


def test_integrate_from_mu_stays(rng):
    k = build_mhrw(random_connected_graph(9, rng), rng.uniform(0.5, 2.0, 9))
    traj = integrate(k, k.mu, 1.5, T=10)
    assert np.max(np.abs(traj.states - k.mu)) <= 1e-12


def test_integrate_batch_and_csv(tmp_path, rng):
    k = build_srw(random_connected_graph(5, rng))
    x0 = rng.dirichlet(np.ones(5), 3)
    traj = integrate(k, x0, 1.0, T=1.0, dt=0.1, stride=2)
    assert traj.states.shape == (len(traj.times), 3, 5)
    assert traj.lyapunov.shape == (len(traj.times), 3)
    single = integrate(k, x0[1], 1.0, T=1.0, dt=0.1, stride=2)
    assert np.allclose(single.states, traj.states[:, 1], atol=1e-15)
    traj.write_csv(tmp_path / "t.csv", column=1)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,x_0,x_1,x_2,x_3,x_4,w"
    assert len(lines) == len(traj.times) + 1


def test_integrate_stop_tol(two_state):
    traj = integrate(two_state, X, 1.0, T=200, stop_tol=1e-10)
    assert traj.t_end < 200
    assert np.max(np.abs(drift(two_state, traj.final, 1.0))) < 1e-10


@pytest.mark.parametrize("alpha", [0.0, 1.0, 5.0, -0.25])
def test_lyapunov_monotone_along_flow(alpha, rng):
    k = build_srw(random_connected_graph(10, rng, weighted=True))
    traj = integrate(k, rng.dirichlet(np.ones(10), 5), alpha, T=20)
    assert traj.max_lyapunov_step <= 1e-10
    assert traj.min_entry > 0


def test_halving_near_boundary(two_state):
    x0 = np.array([1e-9, 1 - 1e-9])
    traj = integrate(two_state, x0, 0.0, T=1.0, dt=1.5)
    assert traj.min_entry > 0
    big = integrate(two_state, x0, 5.0, T=2.0, dt=1.0)
    assert big.halvings > 0
    assert np.all(big.final > 0)


def test_integration_error_when_halving_exhausted(two_state, monkeypatch):
    # for alpha = 0 the flow is linear and a step of 3 overshoots the boundary
    x0 = np.array([1 - 1e-9, 1e-9])
    assert integrate(two_state, x0, 0.0, T=3.0, dt=3.0).halvings > 0
    monkeypatch.setattr(ode, "MIN_DT", 2.0)
    with pytest.raises(IntegrationError):
        integrate(two_state, x0, 0.0, T=3.0, dt=3.0)


def test_integrate_argument_errors(two_state):
    with pytest.raises(ValueError):
        integrate(two_state, X, 1.0, dt=0)
    with pytest.raises(DomainError):
        integrate(two_state, [0.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        integrate(two_state, [0.2, 0.3, 0.5], 1.0)


def test_jacobian_two_state(two_state):
    j = jacobian_at_mu(two_state, 1.0)
    assert np.allclose(j.matrix, [[-1.5, 0.5], [0.5, -1.5]])
    assert np.allclose(j.zeta, [-2.0, -1.0])
    assert np.allclose(jacobian_fd(two_state, 1.0), j.matrix, atol=1e-8)


@given(st.integers(0, 10**6), st.sampled_from([0.0, 0.5, 2.0, 7.0, -0.3]))
@settings(max_examples=50, deadline=None)
def test_jacobian_matches_finite_differences(seed, alpha):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(int(rng.integers(2, 16)), rng, weighted=bool(seed % 2))
    k = build_srw(g) if seed % 3 else build_mhrw(g, rng.uniform(0.3, 2.0, g.n))
    s = compute_spectrum(k)
    j = jacobian_at_mu(k, alpha, s)
    scale = np.max(np.abs(j.matrix))
    coarse = np.max(np.abs(jacobian_fd(k, alpha, step=1e-5) - j.matrix)) / scale
    fine = np.max(np.abs(jacobian_fd(k, alpha, step=1e-6) - j.matrix)) / scale
    assert fine <= 1e-7
    # central differences: error falls quadratically until round-off dominates
    assert fine <= max(0.02 * coarse, 1e-10)
    # eigenpairs: J u_i = zeta_i u_i in the left (mu-weighted) basis of P^T
    resid = j.matrix @ j.right - j.right * j.zeta
    assert np.max(np.abs(resid)) <= 1e-9 * max(1.0, abs(alpha))
    # reversibility makes D^{-1/2} J D^{1/2} symmetric
    d = np.sqrt(k.mu)
    S = j.matrix * (1 / d)[:, None] * d[None, :]
    assert np.max(np.abs(S - S.T)) <= 1e-12 * max(1.0, abs(alpha))


def test_jacobian_fd_step_bounds(two_state):
    with pytest.raises(ValueError):
        jacobian_fd(two_state, 1.0, step=1e-2)
