import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mildhjb import heaviside as hv
from mildhjb.control import (
    FLAG_BOTH,
    FLAG_OK,
    QUASI_INTEGRABILITY_NOTE,
    ClosedForm,
    CostSpec,
    GridScan,
    Policy,
    admissibility_report,
    argmin_control,
    constant_policy,
    current_value_hamiltonian,
    estimate_value,
    evaluate_cost,
    hamiltonian,
    open_loop_policy,
    synthesize_feedback,
)
from mildhjb.errors import ConfigurationError
from mildhjb.sde import ControlledSDE, ControlSet, MonteCarlo, NoiseModel, TimeGrid
from mildhjb.spectral import SpectralOperator, basis

ZERO = CostSpec(l=lambda t, x, a: np.zeros(np.shape(x)[:-1]), g=lambda x: np.zeros(np.shape(x)[:-1]))


def _still(n=3):
    # A = 0, b = 0, sigma = 0: the state never moves
    return ControlledSDE(SpectralOperator(np.zeros(n)), NoiseModel([1.0], lambda t, x: np.zeros(np.shape(x) + (1,))))


def test_zero_cost_is_exactly_zero():
    est = evaluate_cost(_still(), ZERO, constant_policy(0.0), 0.0, np.ones(3), TimeGrid(0, 1, 20), MonteCarlo(10, 1))
    assert est.mean == 0.0 and est.stderr == 0.0
    assert est.quasi_integrability_flag == FLAG_OK


def test_deterministic_terminal_cost():
    cost = CostSpec(l=ZERO.l, g=lambda x: np.asarray(x)[..., 0])
    x0 = np.array([0.7, -1.0, 2.0])
    est = evaluate_cost(_still(), cost, constant_policy(0.0), 0.0, x0, TimeGrid(0, 1, 20), MonteCarlo(10, 1))
    assert est.mean == 0.7 and est.stderr == 0.0


def test_cost_record_fields():
    est = evaluate_cost(_still(), ZERO, constant_policy(0.0, "zero"), 0.0, np.ones(3), TimeGrid(0, 1, 5), MonteCarlo(4, 1))
    assert est.to_record() == {"policy_label": "zero", "mean": 0.0, "stderr": 0.0, "replicas": 4, "flag": FLAG_OK}


def test_cost_grid_start_mismatch():
    with pytest.raises(ConfigurationError):
        evaluate_cost(_still(), ZERO, constant_policy(0.0), 0.5, np.ones(3), TimeGrid(0, 1, 5), MonteCarlo(4, 1))


def test_heaviside_optimal_cost_small_run(params):
    # reduced-replica version of the optimality criterion
    grid = TimeGrid.from_step(0.0, 1.0, 1e-3)
    est = evaluate_cost(hv.problem(params), hv.cost(params), hv.optimal_policy(params), 0.0, params.psi, grid,
                        MonteCarlo(1000, 3))
    assert abs(est.mean - hv.alpha(params)) <= 3 * est.stderr + 2.0 * math.sqrt(grid.h)
    assert est.negative_part_mean > 0  # the terminal cost alpha y^2 is negative
    assert est.mean == pytest.approx(est.positive_part_mean - est.negative_part_mean, abs=1e-12)


def test_current_value_hamiltonian(params):
    prob, cost = hv.problem(params), hv.cost(params)
    x = np.zeros(8)
    a = np.linspace(-3, 3, 7)
    assert np.all(current_value_hamiltonian(ZERO, _still(8), 0.2, x, np.zeros(8), a) == 0.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        s, x, p = rng.uniform(0, 1), rng.standard_normal(8), rng.standard_normal(8)
        got = current_value_hamiltonian(cost, prob, s, x, p, a)
        want = a * (p @ params.phi) + math.exp(-params.rho * s) * (x[0] >= 0) * a**2
        assert np.allclose(got, want, rtol=1e-14, atol=1e-14)


def test_hamiltonian_closed_form_values(params):
    psi = params.psi
    x_neg, x_pos = -psi, 0.5 * psi
    assert hv.hamiltonian_closed_form(0.0, x_neg, psi, params) == -math.inf
    assert hv.hamiltonian_closed_form(0.0, x_pos, 2 * psi, params) == pytest.approx(-1.0)
    assert hv.hamiltonian_closed_form(0.0, x_neg, np.zeros(8), params) == 0.0
    # p orthogonal to phi: F_CV is identically zero on the flat region, so F = 0 there
    assert hv.hamiltonian_closed_form(0.0, x_neg, basis(3, 8), params) == 0.0


def test_numeric_hamiltonian_p_zero(params):
    prob, cost = hv.problem(params), hv.cost(params)
    a, f = argmin_control(cost, prob, 0.3, 0.5 * params.psi, np.zeros(8), GridScan(window=(-50, 50)))
    assert a == 0.0 and f == 0.0


def test_numeric_hamiltonian_detects_minus_infinity(params):
    prob, cost = hv.problem(params), hv.cost(params)
    a, f = argmin_control(cost, prob, 0.0, -params.psi, params.psi, GridScan(window=(-50, 50)))
    assert f == -math.inf and a == -math.inf


def test_flat_region_argmin_is_zero(params):
    prob, cost = hv.problem(params), hv.cost(params)
    a, f = argmin_control(cost, prob, 0.0, -params.psi, basis(2, 8), GridScan(window=(-50, 50)))
    assert a == 0.0 and f == 0.0


def test_unbounded_scan_needs_window(params):
    with pytest.raises(ConfigurationError):
        argmin_control(hv.cost(params), hv.problem(params), 0.0, params.psi, params.psi, GridScan())


def test_bounded_set_scan_without_window(params):
    p = params
    prob = ControlledSDE(hv.problem(p).A, hv.problem(p).noise, b_i=hv.problem(p).b_i, control_set=ControlSet(-1, 1))
    a, f = argmin_control(hv.cost(p), prob, 0.0, p.psi, 4 * p.psi, GridScan())
    assert a == -1.0 and f == pytest.approx(-3.0)  # vertex at -2 lies outside, so the edge wins


def test_hamiltonian_closed_form_handle(params):
    prob, cost = hv.problem(params), hv.cost(params)
    cf = hv.closed_form_argmin(params)
    assert hamiltonian(cost, prob, 0.0, -params.psi, params.psi, cf) == -math.inf
    f = hamiltonian(cost, prob, 0.4, params.psi, 3 * params.psi, cf)
    assert f == pytest.approx(-9 * math.exp(0.2) / 4, rel=1e-14)
    with pytest.raises(ConfigurationError):
        hamiltonian(cost, prob, 0.0, params.psi, params.psi, "nelder-mead")


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(-2, 2), st.floats(-5, 5), st.floats(-10, 10))
def test_minimality_property(s, y, pp, a):
    p = hv.ExampleParams()
    x, pvec = y * p.psi, pp * p.phi
    f = hamiltonian(hv.cost(p), hv.problem(p), s, x, pvec, hv.closed_form_argmin(p))
    fcv = float(current_value_hamiltonian(hv.cost(p), hv.problem(p), s, x, pvec, np.array(a)))
    assert f <= fcv + 1e-12


def test_synthesized_feedback_constant():
    pol = synthesize_feedback(lambda t, x: np.full(np.shape(x)[:-1], 1.5), "c")
    assert np.all(pol.control(0.2, np.zeros((4, 3)), None) == 1.5)
    assert pol.kind == "feedback"


def test_synthesized_feedback_attains_hamiltonian(params):
    prob, cost = hv.problem(params), hv.cost(params)
    cf = hv.closed_form_argmin(params)
    v = hv.candidate(params)
    handle = lambda t, x: np.array([cf.argmin(t, xi, v.dv_dx(t, xi)) for xi in np.atleast_2d(x)])
    pol = synthesize_feedback(handle, "argmin")
    rng = np.random.default_rng(4)
    for _ in range(100):
        t, x = rng.uniform(0, 1), rng.uniform(-2, 2, 8)
        dv = v.dv_dx(t, x)
        a = pol.control(t, x[None], None)[0]
        fcv = float(current_value_hamiltonian(cost, prob, t, x, dv, np.array(a)))
        assert fcv == pytest.approx(hv.hamiltonian_closed_form(t, x, dv, params), abs=1e-12)
        assert a == pytest.approx(hv.optimal_feedback(t, x, params), abs=1e-12)


def test_open_loop_policy_sees_only_past():
    seen = []
    pol = open_loop_policy(lambda t, hist: (seen.append(hist.shape[1]), 0.0)[1])
    prob = _still(1)
    from mildhjb.sde import sample_wiener, simulate_mild

    grid = TimeGrid(0, 1, 4)
    simulate_mild(prob, pol, np.zeros(1), grid, sample_wiener(prob.noise, grid, 0))
    assert seen == [0, 1, 2, 3]
    with pytest.raises(ConfigurationError):
        Policy(lambda t, x: 0.0, kind="closed-loop")


def test_estimate_value_zero_family():
    label, est = estimate_value(_still(), ZERO, [constant_policy(0.0, "zero")], 0.0, np.ones(3),
                                TimeGrid(0, 1, 10), MonteCarlo(5, 0))
    assert label == "zero" and est.mean == 0.0
    with pytest.raises(ConfigurationError):
        estimate_value(_still(), ZERO, [], 0.0, np.ones(3), TimeGrid(0, 1, 10), MonteCarlo(5, 0))


def test_estimate_value_heaviside_family(params):
    grid = TimeGrid.from_step(0.0, 1.0, 2e-3)
    mc = MonteCarlo(800, 21)
    family = [hv.optimal_policy(params), constant_policy(0.0), constant_policy(-1.0), constant_policy(1.0)]
    from mildhjb.control import evaluate_family

    ests = evaluate_family(hv.problem(params), hv.cost(params), family, 0.0, params.psi, grid, mc)
    best = min(ests, key=lambda e: e.mean)
    assert ests[0].mean <= best.mean + 3 * max(ests[0].stderr, best.stderr)


def test_duplicate_policies_identical_under_crn(params):
    grid = TimeGrid(0.0, 1.0, 100)
    family = [constant_policy(1.0, "a"), constant_policy(1.0, "b")]
    from mildhjb.control import evaluate_family

    a, b = evaluate_family(hv.problem(params), hv.cost(params), family, 0.0, params.psi, grid, MonteCarlo(50, 2))
    assert a.mean == b.mean and a.stderr == b.stderr


def test_more_replicas_stays_within_four_stderr(params):
    grid = TimeGrid(0.0, 1.0, 200)
    pol = constant_policy(1.0)
    small = evaluate_cost(hv.problem(params), hv.cost(params), pol, 0.0, params.psi, grid, MonteCarlo(300, 8))
    big = evaluate_cost(hv.problem(params), hv.cost(params), pol, 0.0, params.psi, grid, MonteCarlo(1200, 8))
    assert abs(big.mean - small.mean) <= 4 * math.hypot(small.stderr, big.stderr)


def test_admissibility_flags():
    rng = np.random.default_rng(0)
    light = rng.exponential(size=4000)
    assert admissibility_report(light, np.zeros(4000)) == FLAG_OK
    # alternating signs with magnitudes growing like r^1.5: cumulative sums grow like n^2.5
    r = np.arange(4000)
    mag = (r + 1.0) ** 1.5
    heavy_pos = np.where(r % 2 == 0, mag, 0.0)
    heavy_neg = np.where(r % 2 == 1, mag, 0.0)
    assert admissibility_report(heavy_pos, heavy_neg) == FLAG_BOTH
    assert admissibility_report(heavy_pos, light) == "positive-infinite"
    assert admissibility_report(light, heavy_neg) == "negative-infinite"
    assert "heuristic" in QUASI_INTEGRABILITY_NOTE


def test_heaviside_running_cost_has_no_negative_part(params):
    from mildhjb.control import path_integrals

    grid = TimeGrid(0.0, 1.0, 100)
    out = path_integrals(hv.problem(params), constant_policy(-1.0), params.psi, grid, MonteCarlo(50, 1),
                         running={"neg": lambda t, x, a: np.maximum(-hv.running_cost(t, x, a, params), 0.0)})
    assert np.all(out["neg"] == 0.0)
