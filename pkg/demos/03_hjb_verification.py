# %% [markdown]
# The candidate v = alpha e^{-rho s} Theta(y) y^2 (y = <x, psi>) is not C^2 at
# y = 0, so it is checked as a strong solution: the smooth approximants v_n solve
# perturbed HJB equations exactly and converge uniformly to v. Then the
# verification identity J - v = E int (F_CV - F) dr is tested by Monte Carlo.

# %%
import numpy as np

from mildhjb import MonteCarlo, TimeGrid, ball_probes, check_strong_solution, classical_residual, verification_gap
from mildhjb import heaviside as hv
from mildhjb.control import constant_policy
from mildhjb.hjb import decomposition_residual
from mildhjb.sde import sample_wiener, simulate_mild

p = hv.ExampleParams()
prob, cost, v = hv.problem(p), hv.cost(p), hv.candidate(p)
F = lambda s, x, q: hv.hamiltonian_closed_form(s, x, q, p)
g = lambda x: hv.terminal_cost(x, p)

# %% Each v_n is a classical solution of its own problem.
probes = ball_probes(8, 2.0, 1000, seed=1)
for n in (1, 8, 32):
    tr = hv.approx_triple(n, p)
    st = classical_residual(tr.v_n, prob, lambda s, x, q: -tr.h_n(s, x), probes, tr.g_n, p.T, hv.kinks(p))
    print(f"n={n:2d} alpha_n={hv.alpha_n(n, p):+.5f}  max|L0 v_n - h_n| = {st.max:.1e}")

# %% Uniform convergence on the ball of radius 2.
rep = check_strong_solution(v, [hv.approx_triple(n, p) for n in (1, 2, 4, 8, 16, 32)], F, g,
                            [(2.0, 2000)], p.T, 1.0)
for k, errs in rep.compacts[0]["errors"].items():
    print(k, " ".join(f"{e:.4f}" for e in errs))

# %% Pathwise decomposition of v(t, X(t)) along one optimal path.
grid = TimeGrid(0.0, 1.0, 1000)
traj = simulate_mild(prob, hv.optimal_policy(p), p.psi, grid, sample_wiener(prob.noise, grid, (3, 0)))
res = decomposition_residual(v, traj, prob, F)
print("terminal decomposition residual:", res.terminal)

# %% Verification identity for the optimal feedback and a constant policy.
mc = MonteCarlo(2000, seed=5)
gap = lambda t, x, q, a: hv.hamiltonian_gap(t, x, q, a, p)
for pol in (hv.optimal_policy(p), constant_policy(0.0)):
    r = verification_gap(prob, cost, v, pol, 0.0, p.psi, grid, mc, F, gap)
    print(f"{r.label:>18}: J - v = {r.lhs:+.4f}, E int gap = {r.rhs:+.4f}, "
          f"difference {r.difference:+.4f} +- {r.combined_stderr:.4f}, min gap {r.min_gap:.1e}")
