import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from speciation.core import (DomainError, ModelParams, build_kernels, fitness, potential,
                             random_assumption1_kernels, random_simplex)
from speciation.dynamics import (dvdt, dvdt_chain_rule, integrate_ode, jacobian, ode_rhs, repair,
                                 shahshahani_gradient, tangent_eigenvalues)
from speciation.landscape import polish_stationary

FIG4 = {"L": 14, "capacity": {"kind": "gaussian", "variance": 10},
        "cooperation": {"kind": "step", "b": 0.01, "M": 10}}


def test_rhs_formulas_against_direct_evaluation():
    rng = np.random.default_rng(0)
    k = random_assumption1_kernels(rng, 3)
    pi = random_simplex(rng, k.n)
    p = ModelParams(0.4, 2e-3, 5000)
    m = fitness(pi, k)
    mbar = pi @ m
    n = k.n
    assert np.allclose(ode_rhs(pi, k, p, "eq6"), 0.4 * pi * (m - mbar), atol=1e-15)
    assert np.allclose(ode_rhs(pi, k, p, "eq7"),
                       0.4 * pi * (m - mbar) + 1e-3 * (1 - n * pi), atol=1e-15)
    mt = p.mu_tilde
    assert np.allclose(ode_rhs(pi, k, p, "eq9"),
                       pi * (m - mbar + mt / 2 * (1 / pi - n)), atol=1e-15)
    for v in ("eq6", "eq7", "eq9"):
        assert abs(ode_rhs(pi, k, p, v).sum()) < 1e-12


def test_rhs_trivial_zeros():
    k = build_kernels(FIG4)
    p = ModelParams(0.5, 1e-3, 10**5)
    assert np.all(ode_rhs(k.space.delta(3), k, p, "eq6") == 0)
    flat = build_kernels({"L": 3})
    assert np.allclose(ode_rhs(flat.space.uniform(), flat, p, "eq7"), 0, atol=1e-16)
    with pytest.raises(DomainError):
        ode_rhs(k.space.delta(0), k, variant="eq9", mu_tilde=1e-3)


def test_fixed_point_has_zero_velocity_and_constancy():
    k = build_kernels(FIG4)
    mt = 1e-4
    r = integrate_ode(np.random.default_rng(1).dirichlet(np.ones(k.n)), k, 1e6, "eq9",
                      mu_tilde=mt, t_eval=[], stop_velocity=1e-11)
    pi, ok = polish_stationary(r.terminal, k, mt)
    assert ok
    assert np.abs(ode_rhs(pi, k, variant="eq9", mu_tilde=mt)).max() < 1e-14
    c = fitness(pi, k) + mt / (2 * pi)
    assert c.max() - c.min() < 1e-10
    again = integrate_ode(pi, k, 100.0, "eq9", mu_tilde=mt, t_eval=[])
    assert np.abs(again.terminal - pi).max() < 1e-10


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    k = random_assumption1_kernels(rng, 2)
    pi = random_simplex(rng, k.n)
    J = jacobian(pi, k, "eq9", mu_tilde=1e-2)
    h = 1e-7
    for j in range(k.n):
        e = np.zeros(k.n)
        e[j] = h
        fd = (ode_rhs(pi + e, k, variant="eq9", mu_tilde=1e-2)
              - ode_rhs(pi - e, k, variant="eq9", mu_tilde=1e-2)) / (2 * h)
        assert np.allclose(J[:, j], fd, atol=1e-6)


def test_gradient_identity_and_dvdt():
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = random_assumption1_kernels(rng, 3)
        pi = random_simplex(rng, k.n)
        mt = 10 ** rng.uniform(-5, -2)
        rhs = ode_rhs(pi, k, variant="eq9", mu_tilde=mt)
        assert np.abs(rhs - shahshahani_gradient(pi, k, mt, scale=0.5)).max() < 1e-10
        a, b = dvdt(pi, k, mt), dvdt_chain_rule(pi, k, mt)
        assert a >= 0
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


def test_repair_floor_and_normalization():
    p = repair(np.array([0.5, -1e-18, 0.5]))
    assert p.min() >= 1e-14 * (1 - 1e-12) and abs(p.sum() - 1) < 1e-15


def test_integrator_records_and_marks():
    k = build_kernels(FIG4)
    pi0 = np.random.default_rng(4).dirichlet(np.ones(k.n))
    r = integrate_ode(pi0, k, 50.0, "eq7", ModelParams(0.5, 1e-3, 10**5),
                      t_eval=[0, 10, 25, 50])
    assert list(r.t) == [0, 10, 25, 50]
    assert r.states.shape == (4, k.n)
    assert np.allclose(r.states.sum(axis=1), 1, atol=1e-12)
    r0 = integrate_ode(pi0, k, 50.0, "eq7", ModelParams(0.5, 1e-3, 10**5), t_eval=[])
    assert len(r0.t) == 0 and np.allclose(r0.terminal, r.states[-1], atol=1e-12)


def test_eq9_converges_to_bimodal_in_fig4_regime():
    k = build_kernels(FIG4)
    r = integrate_ode(k.space.uniform(), k, 1e6, "eq9", mu_tilde=1e-4, t_eval=[],
                      stop_velocity=1e-10)
    assert r.status == "stationary"
    assert r.max_v_decrease <= 1e-8
    top = sorted(np.argsort(r.terminal)[-2:] - 14)
    assert top == [-5, 5]
    # a random start may land on another spread-M maximum
    pi0 = np.random.default_rng(5).dirichlet(np.ones(k.n))
    r = integrate_ode(pi0, k, 1e6, "eq9", mu_tilde=1e-4, t_eval=[], stop_velocity=1e-10)
    lo, hi = sorted(np.argsort(r.terminal)[-2:] - 14)
    assert lo < 0 < hi and hi - lo == 10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_lyapunov_monotone_property(seed):
    rng = np.random.default_rng(seed)
    k = random_assumption1_kernels(rng, int(rng.integers(1, 6)))
    mt = 10 ** rng.uniform(-5, -2)
    r = integrate_ode(random_simplex(rng, k.n), k, 200.0, "eq9", mu_tilde=mt, t_eval=None)
    v = [potential(s, k, mt) for s in r.states]
    assert np.min(np.diff(v)) >= -1e-8
    assert r.max_v_decrease <= 1e-8


def test_tangent_eigenvalues_at_local_max_negative():
    k = build_kernels(FIG4)
    mt = 1e-4
    r = integrate_ode(k.space.uniform(), k, 1e6, "eq9", mu_tilde=mt, t_eval=[],
                      stop_velocity=1e-11)
    pi, _ = polish_stationary(r.terminal, k, mt)
    ev = tangent_eigenvalues(pi, k, mt)
    assert ev.shape == (k.n - 1,) and ev.max() < 0
