# %% [markdown]
# epsilon-covariations: Brownian quadratic variation, orthogonality of a
# bounded-variation path to Brownian motion, and the weak-Dirichlet split of
# the value process v(t, X(t)).

# %%
import numpy as np

from mildhjb import ChiFunctional, TimeGrid, covariation_scan, orthogonality_test, weak_dirichlet_split
from mildhjb import heaviside as hv
from mildhjb.sde import Trajectory, WienerPath, replica_rng, sample_wiener_batch, simulate_batch
from mildhjb.svg import write_chart

fine = TimeGrid.from_step(0.0, 1.0, 1e-4)


def brownian(rng):
    w = np.concatenate([[0.0], np.cumsum(rng.standard_normal(fine.M) * np.sqrt(fine.h))])
    return w, w


eps = [0.1, 0.05, 0.02, 0.01]
qv = covariation_scan(brownian, ChiFunctional(), eps, fine, 100, seed=1)
print("[W, W]^eps(1):", np.round(qv.terminal_mean, 4))

W = np.stack([brownian(replica_rng(2, r))[0] for r in range(100)])
ramp = np.broadcast_to(fine.nodes, W.shape)
bv = orthogonality_test(ramp, W, eps, fine, threshold=0.02)
print("[t, W]^eps(1):", np.round(bv.means, 5), "pass" if bv.passed else "fail")

# %% The A-part of v(t, X(t)) under the optimal feedback.
p = hv.ExampleParams()
prob, v = hv.problem(p), hv.candidate(p)
grid = TimeGrid(0.0, 1.0, 1000)
dW = sample_wiener_batch(prob.noise, grid, 3, 0, 100)
states, controls = simulate_batch(prob, hv.optimal_policy(p), p.psi, grid, dW)
A = np.stack([weak_dirichlet_split(v, Trajectory(grid, states[r], controls[r], WienerPath(dW[r])), prob)[1].values
              for r in range(100)])
orth = orthogonality_test(A, WienerPath(dW).path()[..., 0], eps, grid)
print("[A, W]^eps(1):", np.round(orth.means, 4), "+-", np.round(orth.stderrs, 4))
# the finite-eps mean shrinks roughly linearly in eps, and so does its spread

write_chart("demo_covariation.svg", {"[W,W]": (eps, qv.terminal_mean), "|[A,W]|": (eps, np.abs(orth.means))},
            title="terminal epsilon-covariation", xlabel="epsilon", logx=True)
