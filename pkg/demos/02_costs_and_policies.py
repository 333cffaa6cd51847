# %% [markdown]
# Monte Carlo costs of a policy family under common random numbers, and the
# Hamiltonian computed by numeric inner minimization.

# %%
import math

import numpy as np

from mildhjb import GridScan, MonteCarlo, TimeGrid, constant_policy, estimate_value, evaluate_family, hamiltonian
from mildhjb import heaviside as hv

p = hv.ExampleParams()
prob, cost = hv.problem(p), hv.cost(p)
grid = TimeGrid.from_step(0.0, 1.0, 2e-3)
mc = MonteCarlo(2000, seed=20261014)
family = [hv.optimal_policy(p)] + [constant_policy(c) for c in (0.0, -1.0, 1.0, 2.0)]

for est in evaluate_family(prob, cost, family, 0.0, p.psi, grid, mc):
    print(f"{est.label:>18}: J = {est.mean:+.4f} +- {est.stderr:.4f}  [{est.quasi_integrability_flag}]")
label, best = estimate_value(prob, cost, family, 0.0, p.psi, grid, mc)
print("best policy:", label, " v(0, x) =", float(hv.value_v(0.0, p.psi, p)))

# %% The Hamiltonian is -infinity where the running cost is switched off and <p, phi> != 0.
scan = GridScan(window=(-50, 50))
for y in (1.0, -1.0):
    x = y * p.psi
    for pvec in (np.zeros(8), p.psi):
        num = hamiltonian(cost, prob, 0.0, x, pvec, scan)
        print(f"<x,psi>={y:+.0f} |p|={np.linalg.norm(pvec):.0f}: numeric {num}, closed {hv.hamiltonian_closed_form(0.0, x, pvec, p)}")
print("closed form at p = psi, y = 1, s = 0.4:", hv.hamiltonian_closed_form(0.4, p.psi, p.psi, p),
      "=", -math.exp(0.2) / 4)
