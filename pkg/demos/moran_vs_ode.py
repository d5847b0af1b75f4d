"""A Moran population next to its large-N limit.

Runs the particle system at N = 10^5 from the uniform profile and compares
the frequency profile at t = 50 with the integrated mean-field equation.
"""
import numpy as np

from speciation.core import ModelParams, build_kernels, sup_distance
from speciation.dynamics import integrate_ode
from speciation.moran import initial_counts, run_moran

kernels = build_kernels({"L": 14, "capacity": {"kind": "gaussian", "variance": 10},
                         "cooperation": {"kind": "step", "b": 0.01, "M": 10}})
params = ModelParams(sigma=0.5, mu=1e-3, N=10**5)
u = kernels.space.uniform()

ode = integrate_ode(u, kernels, 50.0, "eq7", params, t_eval=[10, 25, 50])
for r in range(3):
    rec = run_moran(kernels, params, horizon=50.0, snapshot_times=[10, 25, 50], seed=0,
                    replica=r, initial=initial_counts(kernels, params.N, u))
    d = [sup_distance(a, b) for a, b in zip(rec.frequencies(), ode.states)]
    print(f"replica {r}: sup-distance at t=10,25,50: " + ", ".join(f"{v:.4f}" for v in d))

print("profile at t=50 (ode):", np.round(ode.states[-1], 3))
