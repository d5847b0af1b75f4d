"""Stationary points of the mutation-selection flow on the Fig.-4 kernels.

Finds every V-maximum for a few mutation levels, then locates the mutation
rate at which the maximum continued from delta_0 disappears.
"""
import numpy as np

from speciation.core import build_kernels
from speciation.landscape import bifurcation_scan, find_stationary_points

kernels = build_kernels({"L": 14, "capacity": {"kind": "gaussian", "variance": 10},
                         "cooperation": {"kind": "step", "b": 0.01, "M": 10}})
sites = kernels.space.sites

for mt in (2e-5, 1e-4, 4e-4):
    search = find_stationary_points(kernels, mt, n_starts=8, seed=1)
    print(f"mu_tilde={mt:g}: {len(search)} stationary points")
    for p in search.local_maxima():
        top = sites[np.argsort(p.pi_hat)[-2:]]
        print(f"   max   mbar={p.mean_fitness:.4f}  heaviest sites {sorted(top.tolist())}")

grid = [4e-5, 4.5e-5, 5e-5, 5.5e-5, 6e-5]
res = bifurcation_scan(kernels, grid, sigma=0.5, limit="drift")
print("flags along the grid:", dict(zip(grid, res.flags)))
lo, hi = res.bracket
print(f"delta_0 branch vanishes between mu = {lo:.4e} and {hi:.4e}")
