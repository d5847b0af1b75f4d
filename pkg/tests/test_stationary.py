import math

import numpy as np
import pytest

from speciation.core import (DomainError, KernelSet, ModelParams, PhenotypeSpace, build_kernels,
                             random_assumption1_kernels, random_simplex)
from speciation.stationary import (StationaryDensity, log_density_via_potential,
                                   log_stationary_density, mcmc_sample_stationary, split_rhat)

from oracles import dirichlet_moments, fitness_loops, step_B


def zero_b_kernels(L):
    sp = PhenotypeSpace(L)
    return KernelSet(sp, np.ones(sp.size), np.zeros(4 * L + 1), np.ones(4 * L + 1))


def test_two_forms_agree():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k = random_assumption1_kernels(rng, 3)
        d = StationaryDensity(k, ModelParams(0.5, 10 ** rng.uniform(-3, -1), 2000))
        pi = random_simplex(rng, k.n)
        a, b = log_stationary_density(pi, d), log_density_via_potential(pi, d)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_l1_spot_value():
    k = build_kernels({"L": 1, "capacity": {"kind": "values", "values": [0.5, 1.0, 0.5]},
                       "cooperation": {"kind": "step", "b": 0.2, "M": 1}})
    N, mu = 100, 0.1
    d = StationaryDensity(k, ModelParams(0.5, mu, N))
    pi = [0.2, 0.5, 0.3]
    m = fitness_loops(pi, [0.5, 1.0, 0.5], lambda z: step_B(z, 0.2, 1), 1)
    want = (N / 2 * mu - 1) * math.fsum(math.log(p) for p in pi) + N / 2 * math.fsum(
        p * v for p, v in zip(pi, m))
    assert log_stationary_density(pi, d) == pytest.approx(want, rel=1e-13)


def test_boundary_sentinel_and_domain():
    k = zero_b_kernels(1)
    d = StationaryDensity(k, ModelParams(0.5, 0.1, 100))
    assert log_stationary_density([0.5, 0.5, 0.0], d) == -math.inf
    with pytest.raises(DomainError):
        StationaryDensity(k, ModelParams(0.5, 0.01, 100))
    with pytest.raises(DomainError):
        StationaryDensity(k, ModelParams(0.5, 0.02, 100))
    StationaryDensity(k, ModelParams(0.5, 0.02, 100), allow_boundary=True)


def test_dirichlet_moments_neutral():
    # B = 0 leaves only the Dirichlet((N/2) mu) factor
    k = zero_b_kernels(1)
    d = StationaryDensity(k, ModelParams(0.5, 0.06, 100))
    r = mcmc_sample_stationary(d, 20_000, seed=1)
    mean, var = dirichlet_moments(3.0, 3)
    se_mean = r.batch_se()
    se_var = r.batch_se(lambda s: (s - mean) ** 2)
    assert np.all(np.abs(r.mean() - mean) < 4 * se_mean)
    assert np.all(np.abs(((r.samples - mean) ** 2).mean(axis=0) - var) < 4 * se_var)
    assert 0.1 < r.acceptance_rate < 0.6 and np.all(r.rhat < 1.1)


def test_mcmc_deterministic_per_seed():
    k = zero_b_kernels(1)
    d = StationaryDensity(k, ModelParams(0.5, 0.06, 100))
    a = mcmc_sample_stationary(d, 500, seed=3)
    b = mcmc_sample_stationary(d, 500, seed=3)
    assert np.array_equal(a.samples, b.samples)


def test_low_acceptance_warns():
    k = zero_b_kernels(2)
    d = StationaryDensity(k, ModelParams(0.5, 0.2, 2000))
    with pytest.warns(RuntimeWarning, match="acceptance"):
        r = mcmc_sample_stationary(d, 200, kappa=0.05, tune=False, burn_in=0)
    assert r.warnings


def test_split_rhat():
    rng = np.random.default_rng(4)
    iid = rng.normal(size=(4000, 2))
    assert np.all(np.abs(split_rhat(iid) - 1) < 0.02)
    shifted = np.concatenate([iid[:2000], iid[2000:] + 3])
    assert np.all(split_rhat(shifted) > 1.5)


def test_rejects_boundary_start():
    k = zero_b_kernels(1)
    d = StationaryDensity(k, ModelParams(0.5, 0.06, 100))
    with pytest.raises(DomainError):
        mcmc_sample_stationary(d, 10, init=[0.5, 0.5, 0.0])
