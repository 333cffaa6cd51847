import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from mildhjb import heaviside as hv
from mildhjb.control import GridScan, current_value_hamiltonian, hamiltonian
from mildhjb.errors import ParameterError
from mildhjb.hjb import apply_L0, ball_probes
from mildhjb.sde import TimeGrid
from mildhjb.spectral import basis

from conftest import y_state


def test_heaviside_values():
    assert hv.heaviside(0.0) == 1.0
    assert hv.heaviside(-0.5) == 0.0
    assert hv.heaviside(3.0) == 1.0
    assert hv.heaviside(np.array([-1.0, 0.0, 1.0])).tolist() == [0.0, 1.0, 1.0]


def test_alpha(params):
    assert hv.alpha(params) == -2.25
    assert hv.alpha(hv.ExampleParams(rho=-2 + 0.25)) == 0.0


def test_alpha_requires_overlap():
    with pytest.raises(ParameterError):
        hv.alpha(hv.ExampleParams(phi=basis(1, 8)))


def test_alpha_n_sign_convention(params):
    # numerator -0.5 - 3 + 0.75 = -2.75 over 1/4 * 9
    assert hv.alpha_n(1, params) == pytest.approx(-11 / 9, rel=1e-15)
    assert hv.printed_alpha_n(1, params) == pytest.approx(11 / 9, rel=1e-15)
    for n in (1, 2, 7, 32):
        assert hv.printed_alpha_n(n, params) == -hv.alpha_n(n, params)
    assert hv.alpha_n(10**7, params) == pytest.approx(hv.alpha(params), rel=1e-6)


def test_value_v_examples(params):
    assert hv.value_v(0.0, y_state(-1.0), params) == 0.0
    assert hv.value_v(0.0, y_state(1.0), params) == -2.25
    x = y_state(1.0)
    assert hv.value_v(params.T, x, params) == pytest.approx(-2.25 * math.exp(-0.5), rel=1e-15)
    assert hv.value_v(params.T, x, params) == hv.terminal_cost(x, params)


def test_terminal_consistency_on_probes(params):
    pr = ball_probes(8, 3.0, 500)
    assert np.array_equal(hv.value_v(params.T, pr.x, params), hv.terminal_cost(pr.x, params))


def test_approximants_terminal_and_sign_region(params):
    pr = ball_probes(8, 2.0, 500)
    for n in (1, 3, 32):
        v, g, h, tr = hv.vn_gn_hn(n, params.T, pr.x, params)
        assert np.array_equal(v, g)
        neg = pr.x[:, 0] < 0
        vs, gs, hs, _ = hv.vn_gn_hn(n, 0.3, pr.x[neg], params)
        assert np.all(vs == 0) and np.all(gs == 0) and np.all(hs == 0)


def test_approximants_are_classical(params):
    prob = hv.problem(params)
    pr = ball_probes(8, 2.0, 1000, seed=4)
    pr = pr.subset(pr.x[:, 0] > 1e-3)
    for n in (1, 2, 8):
        tr = hv.approx_triple(n, params)
        assert np.max(np.abs(apply_L0(tr.v_n, prob, pr.s, pr.x) - tr.h_n(pr.s, pr.x))) <= 1e-8


def test_candidate_hjb_residual(params):
    prob = hv.problem(params)
    v = hv.candidate(params)
    pr = ball_probes(8, 2.0, 1000, seed=5)
    pr = pr.subset(np.abs(pr.x[:, 0]) > 1e-3)
    F = hv.hamiltonian_closed_form(pr.s, pr.x, v.dv_dx(pr.s, pr.x), params)
    assert np.max(np.abs(apply_L0(v, prob, pr.s, pr.x) + F)) <= 1e-8


def test_hamiltonian_closed_form_examples(params):
    assert hv.hamiltonian_closed_form(0.0, y_state(1.0), np.zeros(8), params) == 0.0
    assert hv.hamiltonian_closed_form(0.0, y_state(-1.0), params.psi, params) == -math.inf


def test_hamiltonian_along_candidate(params):
    v = hv.candidate(params)
    pr = ball_probes(8, 2.0, 500, seed=7)
    got = hv.hamiltonian_closed_form(pr.s, pr.x, v.dv_dx(pr.s, pr.x), params)
    y = pr.x[:, 0]
    want = -(2.25**2) * (y >= 0) * y**2 * np.exp(-0.5 * pr.s)
    assert np.allclose(got, want, rtol=1e-14, atol=1e-15)
    assert np.allclose(hv.hamiltonian_along_candidate(pr.s, pr.x, params), want, rtol=1e-14, atol=1e-15)


def test_numeric_hamiltonian_matches_closed_form(params):
    prob, cost = hv.problem(params), hv.cost(params)
    scan = GridScan(window=(-50.0, 50.0))
    v = hv.candidate(params)
    pr = ball_probes(8, 2.0, 150, seed=8)
    for s, x in zip(pr.s, pr.x):
        dv = v.dv_dx(s, x)
        closed = hv.hamiltonian_closed_form(s, x, dv, params)
        assert abs(hamiltonian(cost, prob, s, x, dv, scan) - closed) <= 1e-6


def test_gap_is_nonnegative_completed_square(params):
    prob, cost = hv.problem(params), hv.cost(params)
    rng = np.random.default_rng(0)
    for _ in range(200):
        s, x, p, a = rng.uniform(0, 1), rng.uniform(-2, 2, 8), rng.uniform(-3, 3, 8), rng.uniform(-5, 5)
        F = hv.hamiltonian_closed_form(s, x, p, params)
        gap = hv.hamiltonian_gap(s, x, p, a, params)
        assert gap >= 0.0
        if math.isfinite(F):
            fcv = float(current_value_hamiltonian(cost, prob, s, x, p, np.array(a)))
            assert gap == pytest.approx(fcv - F, abs=1e-12)


def test_optimal_feedback_examples(params):
    assert hv.optimal_feedback(0.0, y_state(-1.0), params) == 0.0
    assert hv.optimal_feedback(0.0, y_state(1.0), params) == 2.25


def test_feedback_attains_infimum(params):
    prob, cost = hv.problem(params), hv.cost(params)
    v = hv.candidate(params)
    rng = np.random.default_rng(11)
    t = rng.uniform(0, 1, 100)
    x = rng.uniform(-2, 2, (100, 8))
    dv = v.dv_dx(t, x)
    a = hv.optimal_feedback(t, x, params)
    fcv = np.array([float(current_value_hamiltonian(cost, prob, ti, xi, pi, np.array(ai)))
                    for ti, xi, pi, ai in zip(t, x, dv, a)])
    assert np.allclose(fcv, hv.hamiltonian_closed_form(t, x, dv, params), atol=1e-12)


def test_problem_coefficients(params):
    prob = hv.problem(params)
    x = np.arange(8.0)
    assert np.array_equal(prob.b(0.0, x, np.array(2.0)) - 0.0, 2.0 * params.phi)
    assert np.array_equal(prob.sigma(0.0, x)[..., 0], 0.5 * x)
    assert prob.A.eigenvalues[0] == -1.0 and prob.A.eigenvalues[1] == -4.0
    kinks = hv.kinks(params)
    assert kinks.excluded(0.0, y_state(5e-4)) and not kinks.excluded(0.0, y_state(2e-3))


def test_scalar_oracle_examples(params):
    assert hv.scalar_oracle_value(0.0, 0.0, params) == 0.0
    assert hv.scalar_oracle_value(0.0, -1.3, params) == 0.0
    assert hv.scalar_oracle_value(0.0, 1.0, params) == pytest.approx(-2.25, abs=1e-12)


def test_scalar_oracle_against_quadrature(params):
    # independent route: integrate the second-moment ODE and the cost numerically
    a, d2 = hv.alpha(params), 1.0
    mu = params.lam - a * d2
    s, y0 = 0.2, 1.4
    sol = solve_ivp(lambda t, m: (2 * mu + params.beta**2) * m, (s, params.T), [y0**2], rtol=1e-12, atol=1e-14,
                    dense_output=True)
    running, _ = quad(lambda r: math.exp(-params.rho * r) * a * a * d2 * sol.sol(r)[0], s, params.T,
                      epsabs=1e-13, epsrel=1e-13)
    terminal = math.exp(-params.rho * params.T) * a * sol.sol(params.T)[0]
    assert hv.scalar_oracle_value(s, y0, params) == pytest.approx(running + terminal, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(-3.0, 0.0), st.floats(0.0, 1.5), st.floats(0.3, 2.0),
       st.floats(0.0, 0.9), st.floats(0.01, 3.0))
def test_scalar_oracle_equals_value(rho, lam, beta, phi_psi, s, y0):
    p = hv.ExampleParams(rho=rho, lam=lam, beta=beta, phi=phi_psi * basis(0, 8))
    x = y_state(y0)
    assert hv.scalar_oracle_value(s, y0, p) == pytest.approx(float(hv.value_v(s, x, p)), rel=1e-9, abs=1e-12)


def test_discrete_scheme_bias_and_allowance(params):
    biases = []
    for h in (4e-3, 2e-3, 1e-3):
        grid = TimeGrid.from_step(0.0, 1.0, h)
        biases.append(hv.discrete_scheme_cost(params, 1.0, grid) - hv.scalar_oracle_value(0.0, 1.0, params))
    assert all(abs(b) < abs(a) for a, b in zip(biases, biases[1:]))
    assert biases[-1] / biases[-2] == pytest.approx(0.5, rel=0.05)  # first order in h
    C = hv.calibrate_allowance(params)
    assert 1.9 < C <= 2.0
