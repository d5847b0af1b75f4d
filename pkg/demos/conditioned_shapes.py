"""Iterating the two conditioned fitness maps from a narrow Gaussian start.

W2 relaxes to a single broad mode. W1 splits into separated modes first.
"""
import numpy as np

from speciation.conditioned import conditioned_kernels, gaussian_start, iterate_to_fixed_point

k = conditioned_kernels(149, 60.0, 55.0)
x = k.space.sites.astype(float)
start = gaussian_start(k, 3.0)

for kind, iters in (("W2", 3_000_000), ("W1", 300_000)):
    res = iterate_to_fixed_point(start, k, kind, tol=1e-12, max_iter=iters,
                                 snapshot_every=20_000)
    var = res.pi_hat @ x**2 - (res.pi_hat @ x) ** 2
    first = res.bimodal_iterations[0] if res.bimodal_iterations else None
    print(f"{kind}: converged={res.converged} after {res.iterations} iterations, "
          f"variance {var:.1f}, first split at iteration {first}")
