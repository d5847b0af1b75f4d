from fractions import Fraction

import numpy as np
import pytest

from speciation.core import (KernelSet, assumption1_kernels, build_kernels, fitness,
                             random_assumption1_kernels)
from speciation.landscape import (FaceSpec, TheoremViolation, bifurcation_scan, bound_audit,
                                  constancy_residual, effective_mu_tilde, face_local_max,
                                  find_stationary_points, gap_audit, make_point, polish_stationary,
                                  three_point_formula, three_point_values, two_point_formula,
                                  v_local_max_near, verify_stationarity)

from oracles import equal_fitness_face

def random_step_kernels(rng, L=8, M=4, bmax=0.3):
    # symmetric K that need not be unimodal; the two-site side conditions need this
    h = rng.uniform(0.05, 1, L)
    return assumption1_kernels(L, rng.uniform(0, bmax), M, K=np.concatenate([h[::-1], [1.0], h]))


FIG4 = {"L": 14, "capacity": {"kind": "gaussian", "variance": 10},
        "cooperation": {"kind": "step", "b": 0.01, "M": 10}}


def test_face_weights_match_exact_solve():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k = random_assumption1_kernels(rng, 6, M=3)
        for sup in [(-3, 0), (-4, -1, 2), (-6, 0, 6)]:
            c = face_local_max(sup, k)
            w, m1 = equal_fitness_face([Fraction(k.K_at(x)) for x in sup], Fraction(k.b))
            assert np.allclose(c.support_weights, [float(v) for v in w], rtol=1e-11, atol=1e-13)
            assert c.m1 == pytest.approx(float(m1), rel=1e-11)


def test_face_spacing_enforced():
    k = assumption1_kernels(4, 0.2, 3, capacity_variance=4.0)
    with pytest.raises(ValueError, match="closer than M"):
        face_local_max((0, 2), k)
    with pytest.raises(ValueError, match="leaves the lattice"):
        FaceSpec.make((0, 5), k)


def test_two_point_formula_against_oracle():
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(200):
        k = random_step_kernels(rng)
        for x in range(-3, 0):
            r = two_point_formula(x, k)
            if r.weights is None or not r.conditions_hold:
                continue
            w, m1 = equal_fitness_face([Fraction(k.K_at(s)) for s in r.support], Fraction(k.b))
            assert r.weights[0] == pytest.approx(float(w[0]), abs=1e-10)
            assert r.mean_fitness == pytest.approx(float(m1), rel=1e-10)
            checked += 1
    assert checked > 20


def test_three_point_squares_form_matches_oracle():
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(200):
        k = random_assumption1_kernels(rng, 8, M=4)
        for x in range(-3, 4):
            r = three_point_formula(x, k, printed=False)
            if r.weights is None:
                continue
            w, m1 = equal_fitness_face([Fraction(k.K_at(s)) for s in r.support], Fraction(k.b))
            assert np.allclose(r.weights, [float(v) for v in w], atol=1e-9)
            assert r.mean_fitness == pytest.approx(float(m1), rel=1e-9)
            checked += 1
    assert checked > 50


def test_printed_three_point_disagrees_when_outer_k_below_one():
    Kl, Kc, Kr, b = 0.5, 0.9, 0.6, 0.1
    p1 = three_point_values(Kl, Kc, Kr, b, printed=True)[0]
    p2 = three_point_values(Kl, Kc, Kr, b, printed=False)[0]
    assert abs(p1 - p2) > 1e-3
    assert three_point_values(Kl, Kc, 1.0, b, True)[:3] == three_point_values(Kl, Kc, 1.0, b,
                                                                             False)[:3]


def test_delta0_validity_is_km_below_b():
    K = [0.05, 0.1, 0.2, 0.25, 0.8, 0.9, 1, 0.9, 0.8, 0.25, 0.2, 0.1, 0.05]
    assert face_local_max((0,), assumption1_kernels(6, 0.3, 3, K=K)).valid
    k = assumption1_kernels(6, 0.2, 3, K=K)
    c = face_local_max((0,), k)
    assert not c.valid and "off-support" in c.reasons[0]


def fig4_bimodal(mu_tilde):
    k = build_kernels(FIG4)
    c = face_local_max((-5, 5), k)
    pi, ok = polish_stationary(0.999 * c.weights + 0.001 / k.n, k, mu_tilde)
    assert ok
    return k, pi


def test_bound_audit_example_constants():
    k, pi = fig4_bimodal(1e-6)
    K5 = np.exp(-25 / 20)
    lim = 4 * K5**2 / 58**3
    floor_ = (1e-6 * K5 / 4) ** (2 / 3)
    assert lim == pytest.approx(1.683e-6, rel=1e-3) and floor_ == pytest.approx(1.7247e-5, rel=1e-4)
    entries = {e.theorem: e for e in bound_audit(pi, k, 1e-6)}
    e = entries["lemma_mbar_floor"]
    assert e.hypothesis_ok and e.conclusion_ok
    assert e.margin == pytest.approx(pi @ fitness(pi, k) - floor_, rel=1e-12)
    assert entries["thm_two_sided_left"].conclusion_ok
    assert not entries["thm_middle_mass"].hypothesis_ok


def test_bound_audit_rejects_nonstationary_and_reports_state():
    k, pi = fig4_bimodal(1e-6)
    ramp = np.linspace(1, 2, k.n)
    with pytest.raises(ValueError, match="not a stationary"):
        bound_audit(ramp / ramp.sum(), k, 1e-6)
    err = TheoremViolation(bound_audit(pi, k, 1e-6)[0], {"mu_tilde": 1e-6})
    assert "thm_two_sided_left" in str(err) and "mu_tilde=1e-06" in str(err)


def test_stationary_point_scales_with_capacity():
    k, pi = fig4_bimodal(1e-4)
    for c in (0.5, 2.0):
        kc = KernelSet(k.space, c * k.K, k.B, k.C, k.b, k.M)
        assert constancy_residual(pi, kc, 1e-4 * c**2) < 1e-12


def test_verify_stationarity_sensitivity():
    k, pi = fig4_bimodal(1e-4)
    d = verify_stationarity(pi, k, 1e-4, np.random.default_rng(3))
    assert d["constancy_residual"] < 1e-8 and d["subset_max_deviation"] < 1e-8
    assert d["order_equivalence"] and d["sign_equivalence"]
    assert d["subset_without_count_deviation"] > 1e-6
    bad = pi.copy()
    bad[14] *= 1.01
    bad /= bad.sum()
    assert verify_stationarity(bad, k, 1e-4)["constancy_residual"] > 1e-6


def test_gap_audit_finds_ascent_direction():
    k = build_kernels(FIG4)
    pi = np.zeros(k.n)
    pi[[7, 21]] = 0.5
    g = gap_audit(pi, k)
    assert g.applicable and g.found and g.gap == (-7, 7)
    m = fitness(pi, k)
    assert g.derivative == pytest.approx(2 * (m[g.site + 14] - m[g.against + 14]))
    pi2 = np.zeros(k.n)
    pi2[[9, 19]] = 0.5
    assert not gap_audit(pi2, k).applicable


def test_find_stationary_points_small_system():
    k = assumption1_kernels(3, 0.2, 2, K=[0.3, 0.6, 0.9, 1, 0.9, 0.6, 0.3])
    res = find_stationary_points(k, 1e-3, n_starts=6, seed=1)
    assert len(res) >= 1 and not res.unresolved
    for p in res:
        assert p.constancy_residual < 1e-8 and p.velocity < 1e-10
    assert res.local_maxima()


def test_v_local_max_near_delta0():
    k = build_kernels(FIG4)
    d0 = k.space.delta(0)
    pt = v_local_max_near(d0, k, 1e-5)
    assert pt is not None and pt.pi_hat[14] > 0.9
    assert v_local_max_near(d0, k, 2e-4) is None


def test_effective_mu_tilde_readings():
    assert effective_mu_tilde(6e-5, "drift") == pytest.approx(1.2e-4)
    assert effective_mu_tilde(6e-5, "potential", N=50625) == pytest.approx(6e-5 - 2 / 50625)
    with pytest.raises(ValueError):
        effective_mu_tilde(1e-4, "potential")


def test_bifurcation_scan_edge_cases():
    k = build_kernels(FIG4)
    with pytest.raises(ValueError, match="monotone"):
        bifurcation_scan(k, [2e-5, 1e-5, 3e-5], limit="drift")
    with pytest.raises(ValueError, match="positive mu_tilde"):
        bifurcation_scan(k, [1e-5, 2e-5], N=50625)
    r = bifurcation_scan(k, [1e-5, 2e-5], limit="drift")
    assert not r.found and r.flags == [True, True]


def test_middle_mass_needs_site_count():
    # near-delta_0 maximum where the bound without the factor 2q - 2 fails
    half = [1.0, 0.872, 0.523, 0.309, 0.25, 0.166, 0.132]
    k = assumption1_kernels(6, 0.556, 4, K=half[:0:-1] + half)
    mt = 5e-5
    pi, ok = polish_stationary(0.999 * k.space.delta(0) + 0.001 / k.n, k, mt)
    assert ok
    e = {a.theorem: a for a in bound_audit(pi, k, mt)}
    assert e["thm_middle_mass"].hypothesis_ok and e["thm_middle_mass"].conclusion_ok
    assert e["thm_middle_mass_printed_form"].conclusion_ok is False
    per_site = mt / (2 * (0.556 * (1 - 0.872) * 0.872 - 0.872 * pi[np.abs(k.space.sites) >= 2].sum()))
    assert pi[[5, 7]].max() <= per_site * (1 + 1e-6)
