import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mildhjb import heaviside as hv
from mildhjb.control import constant_policy
from mildhjb.covariation import (
    ChiFunctional,
    ScalarPath,
    covariation_scan,
    covariation_scan_paths,
    epsilon_covariation,
    orthogonality_test,
    weak_dirichlet_split,
)
from mildhjb.errors import ConfigurationError
from mildhjb.hjb import HJBCandidate
from mildhjb.sde import ControlledSDE, NoiseModel, TimeGrid, replica_rng, sample_wiener, simulate_mild
from mildhjb.spectral import SpectralOperator

FINE = TimeGrid(0.0, 1.0, 10_000)
EPS = [0.1, 0.05, 0.02, 0.01]


def _bm(rng, grid=FINE):
    return np.concatenate([[0.0], np.cumsum(rng.standard_normal(grid.M) * np.sqrt(grid.h))])


def _brownian_batch(seed, replicas=100, grid=FINE):
    return np.stack([_bm(replica_rng(seed, r), grid) for r in range(replicas)])


def test_brownian_quadratic_variation():
    W = _brownian_batch(0)
    qv = epsilon_covariation(W, W, ChiFunctional(), 0.01, FINE)
    assert abs(qv.values[:, -1].mean() - 1.0) <= 0.05


def test_ramp_against_brownian_vanishes():
    W = _brownian_batch(1)
    ramp = np.broadcast_to(FINE.nodes, W.shape)
    term = epsilon_covariation(ramp, W, ChiFunctional(), 0.01, FINE).values[:, -1]
    assert abs(term.mean()) <= 2 * term.std(ddof=1)


def test_constant_path_gives_zero():
    W = _bm(replica_rng(2, 0))
    out = epsilon_covariation(W, np.full_like(W, 3.0), ChiFunctional(), 0.05, FINE)
    assert np.all(out.values == 0.0)


def test_epsilon_must_be_grid_multiple():
    W = _bm(replica_rng(2, 0))
    with pytest.raises(ConfigurationError):
        epsilon_covariation(W, W, ChiFunctional(), 0.000015, FINE)
    with pytest.raises(ConfigurationError):
        covariation_scan_paths(W, W, ChiFunctional(), [0.01, 0.1], FINE)


def test_explicit_sum_small_grid():
    grid = TimeGrid(0.0, 1.0, 4)
    X = np.array([0.0, 1.0, 3.0, 2.0, 5.0])
    Y = np.array([1.0, 0.0, 2.0, 2.0, 1.0])
    out = epsilon_covariation(X, Y, ChiFunctional(2.0, 0.5), 0.5, grid).values
    # shift m = 2; the paths are held constant past T
    dx = np.array([3.0, 1.0, 2.0, 3.0])
    dy = np.array([1.0, 2.0, -1.0, -1.0])
    want = np.concatenate([[0.0], np.cumsum(2 * dx * 0.5 * dy * 0.25 / 0.5)])
    assert np.allclose(out, want, atol=1e-15)


def test_vector_paths_and_functional_sums():
    rng = np.random.default_rng(3)
    grid = TimeGrid(0.0, 1.0, 100)
    X = rng.standard_normal((grid.M + 1, 3))
    Y = rng.standard_normal((grid.M + 1, 3))
    u, w = np.array([1.0, 0.0, 2.0]), np.array([0.0, 1.0, 1.0])
    vec = epsilon_covariation(X, Y, ChiFunctional(u, w), 0.05, grid).values
    scalar = epsilon_covariation(X @ u, Y @ w, ChiFunctional(), 0.05, grid).values
    assert np.allclose(vec, scalar, atol=1e-13)
    both = epsilon_covariation(X, Y, [ChiFunctional(u, w), ChiFunctional(w, u)], 0.05, grid).values
    other = epsilon_covariation(X @ w, Y @ u, ChiFunctional(), 0.05, grid).values
    assert np.allclose(both, scalar + other, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_bilinear_in_first_argument(a, b, seed):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(0.0, 1.0, 50)
    X1, X2, Y = rng.standard_normal((3, grid.M + 1))
    chi = ChiFunctional()
    lhs = epsilon_covariation(a * X1 + b * X2, Y, chi, 0.1, grid).values
    rhs = a * epsilon_covariation(X1, Y, chi, 0.1, grid).values + b * epsilon_covariation(X2, Y, chi, 0.1, grid).values
    assert np.allclose(lhs, rhs, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.sampled_from([0.02, 0.1, 0.5]))
def test_self_covariation_nonnegative(seed, eps):
    X = np.random.default_rng(seed).standard_normal(51)
    out = epsilon_covariation(X, X, ChiFunctional(), eps, TimeGrid(0.0, 1.0, 50)).values
    assert np.all(out >= 0.0) and np.all(np.diff(out) >= 0.0)


def test_scan_sup_deviation_decreases():
    est = covariation_scan(lambda rng: (w := _bm(rng), w), ChiFunctional(), [0.1, 0.05, 0.01], FINE, 100, 5)
    dev = est.sup_deviation
    assert dev[0] > dev[1] > dev[2] == 0.0
    assert abs(est.terminal_mean[-1] - 1.0) <= 0.05


def test_scan_smooth_path_tends_to_zero():
    grid = TimeGrid(0.0, 1.0, 1000)
    smooth = np.sin(2 * np.pi * grid.nodes)
    est = covariation_scan_paths(smooth, smooth, ChiFunctional(), [0.1, 0.05, 0.01, 0.002], grid)
    mags = np.abs(est.terminal_mean)
    assert np.all(np.diff(mags) < 0) and mags[-1] < 0.05


def test_scan_is_deterministic(tmp_path):
    sample = lambda rng: (w := _bm(rng, TimeGrid(0, 1, 1000)), w)
    grid = TimeGrid(0, 1, 1000)
    a = covariation_scan(sample, ChiFunctional(), [0.1, 0.01], grid, 20, 9)
    b = covariation_scan(sample, ChiFunctional(), [0.1, 0.01], grid, 20, 9)
    assert a.to_record() == b.to_record()
    a.to_csv(tmp_path / "c.csv")
    header = (tmp_path / "c.csv").read_text().splitlines()[0]
    assert header == "t,eps=0.10000000000000001,eps=0.01"


def test_orthogonality_examples():
    W = _brownian_batch(6)
    ramp = np.broadcast_to(FINE.nodes, W.shape)
    assert orthogonality_test(ramp, W, EPS, FINE, threshold=0.02).passed
    self_rep = orthogonality_test(W, W, EPS, FINE, threshold=0.02)
    assert not self_rep.passed
    assert self_rep.means[-1] == pytest.approx(1.0, abs=0.05)
    zero = orthogonality_test(np.zeros_like(W), W, EPS, FINE)
    assert zero.passed and all(m == 0.0 for m in zero.means)


def test_weak_dirichlet_split_martingale_fixture():
    # v(s, x) = x with A = 0, b = 0, sigma = 1: v(X) is a martingale, so the A-part vanishes
    prob = ControlledSDE(SpectralOperator(np.zeros(1)), NoiseModel([1.0], lambda t, x: np.ones(np.shape(x) + (1,))))
    v = HJBCandidate(lambda s, x: np.asarray(x)[..., 0], None, lambda s, x: np.ones(np.shape(x)), dim=1)
    for M in (100, 1000):
        grid = TimeGrid(0.0, 1.0, M)
        traj = simulate_mild(prob, constant_policy(0.0), np.array([0.5]), grid, sample_wiener(prob.noise, grid, 3))
        R, A = weak_dirichlet_split(v, traj, prob)
        assert A.values[0] == 0.0
        assert np.max(np.abs(A.values)) <= 1e-12
        assert R.values[0] == 0.5


def test_weak_dirichlet_split_heaviside(params):
    prob = hv.problem(params)
    grid = TimeGrid(0.0, 1.0, 400)
    traj = simulate_mild(prob, hv.optimal_policy(params), params.psi, grid, sample_wiener(prob.noise, grid, 2))
    R, A = weak_dirichlet_split(hv.candidate(params), traj, prob)
    assert A.values[0] == 0.0
    assert np.allclose(R.values + A.values, hv.value_v(grid.nodes, traj.states, params))
    with pytest.raises(ConfigurationError):
        ScalarPath(grid, np.zeros(3))
