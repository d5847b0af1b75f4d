import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from speciation.core import (DegenerateStateError, DomainError, KernelSet, PhenotypeSpace,
                             build_kernels, gaussian_kernel, random_simplex)
from speciation.conditioned import (conditioned_kernels, det_map_step, fitness_w, gaussian_start,
                                    iterate_to_fixed_point, near_delta_start,
                                    offspring_distribution, tridiagonal_mutation, w2_capacity_residual,
                                    wf_sample_step)

from oracles import det_map_hand, w_loops


def rect_kernels(L=2):
    return build_kernels({"L": L, "capacity": {"kind": "values", "values": [0.2, 1, 1, 1, 0.2]},
                          "competition": {"kind": "rectangular", "width": 1}})


def test_w_at_delta0():
    k = conditioned_kernels(10, 4.0, 3.0)
    d0 = k.space.delta(0)
    assert fitness_w(d0, k, "W1")[10] == 0.0
    assert fitness_w(d0, k, "W2")[10] == 1.0


def test_w_matches_loops_rectangular():
    k = rect_kernels(2)
    rng = np.random.default_rng(0)
    K = list(k.K)
    C = lambda z: k.C_at(z)
    for _ in range(10):
        pi = random_simplex(rng, 5)
        for kind in ("W1", "W2"):
            assert np.allclose(fitness_w(pi, k, kind), w_loops(list(pi), K, C, 2, kind))


def test_w2_zero_denominator_names_site():
    sp = PhenotypeSpace(2)
    C = np.zeros(9)
    C[4] = 1.0
    k = KernelSet(sp, np.ones(5), 1 - C, C)
    with pytest.raises(DomainError, match="site"):
        fitness_w(sp.delta(0), k, "W2")


def test_det_map_hand_three_sites():
    sp = PhenotypeSpace(1)
    C = np.array([0.0, 0.5, 1.0, 0.5, 0.0])
    K = np.array([0.8, 1.0, 0.8])
    k = KernelSet(sp, K, 1 - C, C)
    pi = np.array([0.2, 0.5, 0.3])
    A = tridiagonal_mutation(3, 0.1)
    Cf = lambda z: C[z + 2]
    for kind in ("W1", "W2"):
        W = w_loops(list(pi), list(K), Cf, 1, kind)
        want = det_map_hand(list(pi), W, A.tolist())
        assert np.allclose(det_map_step(pi, k, kind, A), want, atol=1e-15)


def w2_fixed_kernels():
    # K proportional to C * uniform makes the uniform state a W2 fixed point
    sp = PhenotypeSpace(3)
    C = gaussian_kernel(sp, sigma=1.5)
    K = KernelSet(sp, np.ones(7), 1 - C, C).Cmat @ sp.uniform()
    return KernelSet(sp, K / K.max(), 1 - C, C)


def test_fixed_point_is_preserved_and_w_balanced():
    k = w2_fixed_kernels()
    tol = 1e-14
    p0 = k.space.uniform() + 0.02 * np.array([1, -1, 1, -1, 1, -1, 0])
    res = iterate_to_fixed_point(p0, k, "W2", tol=tol, max_iter=10**6)
    assert res.converged
    pi = res.pi_hat
    assert np.abs(pi - k.space.uniform()).max() < 1e-10
    assert np.abs(det_map_step(pi, k, "W2") - pi).max() < tol
    W = fitness_w(pi, k, "W2")
    wbar = pi @ W
    sup = pi > 1e-9
    assert np.max(pi[sup] * np.abs(W[sup] - wbar)) < tol * wbar
    assert w2_capacity_residual(pi, k) < 1e-11
    again = iterate_to_fixed_point(k.space.uniform(), k, "W2", tol=1e-12)
    assert again.iterations == 1 and again.converged


@pytest.mark.xfail(strict=True, reason="unweighted W spread at the step-size stop exceeds 10 tol "
                                       "when contraction is slow; see the decisions ledger")
def test_unweighted_w_spread_below_ten_tol():
    k = w2_fixed_kernels()
    tol = 1e-14
    p0 = k.space.uniform() + 0.02 * np.array([1, -1, 1, -1, 1, -1, 0])
    res = iterate_to_fixed_point(p0, k, "W2", tol=tol, max_iter=10**6)
    assert res.converged and res.condition_residual < 10 * tol


def test_constant_w_on_support_is_fixed():
    sp = PhenotypeSpace(3)
    k = KernelSet(sp, np.ones(sp.size), np.zeros(4 * 3 + 1), np.ones(4 * 3 + 1))
    pi = np.array([0, 0.3, 0, 0.4, 0, 0.3, 0])
    assert np.allclose(det_map_step(pi, k, "W2"), pi, atol=1e-15)


def test_support_never_grows_without_mutation():
    k = conditioned_kernels(6, 3.0, 2.0)
    pi = np.zeros(k.n)
    pi[[4, 6, 9]] = [0.3, 0.3, 0.4]
    for _ in range(50):
        pi = det_map_step(pi, k, "W2")
        assert np.all(pi[[i for i in range(k.n) if i not in (4, 6, 9)]] == 0)


def test_zero_mean_fitness_is_degenerate():
    k = conditioned_kernels(3, 2.0, 2.0)
    with pytest.raises(DegenerateStateError):
        det_map_step(k.space.delta(0), k, "W1")


def test_mutation_matrix_rows_stochastic():
    A = tridiagonal_mutation(7, 0.2)
    assert np.allclose(A.sum(axis=1), 1, atol=1e-15) and A.min() >= 0
    with pytest.raises(ValueError):
        tridiagonal_mutation(5, 0.7)


def test_offspring_is_probability_vector():
    rng = np.random.default_rng(4)
    k = conditioned_kernels(4, 3.0, 2.0)
    A = tridiagonal_mutation(k.n, 0.05)
    for _ in range(100):
        pi = random_simplex(rng, k.n)
        p = offspring_distribution(pi, k, "W2", A)
        assert abs(p.sum() - 1) < 1e-12 and p.min() >= 0


def test_pure_resampling_when_w_constant():
    sp = PhenotypeSpace(2)
    k = KernelSet(sp, np.ones(5), np.zeros(9), np.ones(9))
    pi = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    assert np.allclose(offspring_distribution(pi, k, "W2"), pi, atol=1e-15)


def test_wf_sample_mean_matches_p():
    rng = np.random.default_rng(5)
    k = conditioned_kernels(2, 2.0, 1.5)
    counts = np.array([3, 10, 20, 12, 5])
    N = counts.sum()
    p = offspring_distribution(counts / N, k, "W2")
    R = 10_000
    draws = np.array([wf_sample_step(counts, k, "W2", rng=rng) for _ in range(R)]) / N
    se = np.sqrt(p * (1 - p) / N / R)
    assert np.all(np.abs(draws.mean(axis=0) - p) < 3 * se)


def test_gaussian_start_normalized():
    k = conditioned_kernels(149, 60.0, 55.0)
    p = gaussian_start(k, 3.0)
    assert abs(p.sum() - 1) < 1e-15 and p.argmax() == 149


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_det_map_preserves_simplex(seed):
    rng = np.random.default_rng(seed)
    k = conditioned_kernels(4, rng.uniform(1, 5), rng.uniform(1, 5))
    pi = random_simplex(rng, k.n)
    out = det_map_step(pi, k, "W2", tridiagonal_mutation(k.n, rng.uniform(0, 0.5)))
    assert abs(out.sum() - 1) < 1e-12 and out.min() >= 0
