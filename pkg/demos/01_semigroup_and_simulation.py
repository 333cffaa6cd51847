# %% [markdown]
# Truncated space, the exact semigroup and exponential-Euler simulation.
#
# The state lives in the span of the first N eigenvectors of a diagonal
# operator A with eigenvalues -k^2. Each time step applies e^{hA} exactly, so
# stiff high modes cause no instability.

# %%
import numpy as np

from mildhjb import SpectralOperator, TimeGrid, sample_wiener, simulate_mild
from mildhjb import heaviside as hv
from mildhjb.fixtures import make_problem
from mildhjb.control import constant_policy
from mildhjb.sde import WienerPath, sample_wiener_batch, simulate_batch

A = SpectralOperator.default(8)
print("eigenvalues:", A.eigenvalues)
x = np.ones(8)
print("e^{0.1 A} x =", np.round(A.semigroup(0.1, x), 4))

# %% With no drift and no noise, simulation reproduces the flow exactly.
p = hv.ExampleParams()
linear = make_problem("linear", p)
grid = TimeGrid(0.0, 1.0, 100)
traj = simulate_mild(linear, constant_policy(0.0), x, grid, sample_wiener(linear.noise, grid, 0))
flow = A.semigroup(grid.nodes, np.broadcast_to(x, (101, 8)))
print("max |simulated - semigroup| =", np.abs(traj.states - flow).max())

# %% The controlled Heaviside system under its optimal feedback.
prob = hv.problem(p)
traj = simulate_mild(prob, hv.optimal_policy(p), p.psi, grid, sample_wiener(prob.noise, grid, (1, 0)))
print("<X(1), psi> =", traj.states[-1, 0], " a(0) =", traj.controls[0])
traj.to_csv("demo_trajectory.csv")

# %% Strong convergence: same Brownian path at h and h/2 (increments summed pairwise).
fine = TimeGrid(0.0, 1.0, 1600)
dW = sample_wiener_batch(prob.noise, fine, 7, 0, 200)
ends = {}
for f in (1, 2, 4, 8, 16):
    states, _ = simulate_batch(prob, hv.optimal_policy(p), p.psi, fine.coarsen(f), WienerPath(dW).coarsen(f).increments)
    ends[f] = states[:, -1, 0]
for f in (16, 8, 4, 2):
    rms = np.sqrt(np.mean((ends[f] - ends[f // 2]) ** 2))
    print(f"h = {fine.h * f:.5f}: RMS |X_h - X_h/2| = {rms:.5f}")
