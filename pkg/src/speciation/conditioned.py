"""Fixed-size discrete-generation model with density-dependent fitness.

Two fitness functions on E, with c_x = (C * pi)_x the competition felt at x:

    W1_x = max(0, 1 - c_x / K_x)
    W2_x = K_x / c_x

The deterministic map is pi'_x = sum_y A(y, x) pi_y W_y / sum_z pi_z W_z; the
finite-N version draws the next generation multinomially from the same p.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import DegenerateStateError, DomainError, KernelSet, build_kernels
from .modes import SpeciationCriterion, is_speciated

KINDS = ("W1", "W2")
SUPPORT_THRESHOLD = 1e-9
UNDERFLOW = 1e-290


def conditioned_kernels(L: int, sigma_K: float, sigma_C: float) -> KernelSet:
    """Gaussian capacity and competition with K_0 = C_0 = 1."""
    return build_kernels({
        "L": L,
        "capacity": {"kind": "gaussian", "sigma": sigma_K},
        "competition": {"kind": "gaussian", "sigma": sigma_C},
    })


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"fitness kind must be one of {KINDS}, got {kind!r}")


def fitness_w(pi, kernels: KernelSet, kind: str = "W2") -> np.ndarray:
    _check_kind(kind)
    pi = np.asarray(pi, dtype=float)
    conv = kernels.Cmat @ pi
    if kind == "W1":
        return np.maximum(0.0, 1.0 - conv / kernels.K)
    bad = np.flatnonzero(conv <= 0)
    if bad.size:
        raise DomainError(f"W2 undefined: zero competition at site {bad[0] - kernels.L}")
    return kernels.K / conv


def identity_mutation(n: int) -> np.ndarray:
    return np.eye(n)


def tridiagonal_mutation(n: int, rate: float) -> np.ndarray:
    """Move one site left or right with probability ``rate`` each; the ends reflect."""
    if not 0 <= rate <= 0.5:
        raise ValueError("rate must lie in [0, 1/2]")
    A = np.zeros((n, n))
    for i in range(n):
        A[i, i] = 1 - 2 * rate
        A[i, max(i - 1, 0) if i > 0 else 1] += rate
        A[i, min(i + 1, n - 1) if i < n - 1 else n - 2] += rate
    return A


def check_mutation(A, n: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (n, n):
        raise ValueError(f"mutation matrix must be {n}x{n}")
    if np.any(A < 0) or np.any(np.abs(A.sum(axis=1) - 1) > 1e-12):
        raise ValueError("mutation matrix must be row-stochastic")
    return A


def offspring_distribution(pi, kernels: KernelSet, kind: str = "W2", A=None) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    w = fitness_w(pi, kernels, kind)
    q = pi * w
    s = q.sum()
    if not s > 0:
        raise DegenerateStateError("mean fitness is zero; no individual can reproduce")
    q /= s
    if A is not None:
        q = q @ check_mutation(A, kernels.n)
        q /= q.sum()
    return q


def det_map_step(pi, kernels: KernelSet, kind: str = "W2", A=None) -> np.ndarray:
    return offspring_distribution(pi, kernels, kind, A)


def wf_sample_step(counts, kernels: KernelSet, kind: str = "W2", A=None,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    counts = np.asarray(counts)
    N = int(counts.sum())
    if N < 1:
        raise ValueError("population is empty")
    rng = np.random.default_rng() if rng is None else rng
    p = offspring_distribution(counts / N, kernels, kind, A)
    return rng.multinomial(N, p)


def near_delta_start(n: int, eps: float = 1e-3) -> np.ndarray:
    p = np.full(n, eps / n)
    p[n // 2] += 1 - eps
    return p


def gaussian_start(kernels: KernelSet, sd: float = 3.0) -> np.ndarray:
    """Discretized Gaussian at 0 computed in log space; entries below 1e-290 are zeroed."""
    x = kernels.space.sites.astype(float)
    lp = -(x**2) / (2 * sd * sd)
    p = np.exp(lp - lp.max())
    p[p < UNDERFLOW] = 0.0
    return p / p.sum()


@njit(cache=True)
def _iterate(p, Cm, K, w1, T, tol, A, use_A):
    n = p.shape[0]
    q = np.empty(n)
    dist = np.inf
    for it in range(T):
        conv = Cm @ p
        s = 0.0
        for i in range(n):
            if w1:
                w = 1.0 - conv[i] / K[i]
                if w < 0.0:
                    w = 0.0
            else:
                w = K[i] / conv[i] if conv[i] > 0 else 0.0
            q[i] = p[i] * w
            s += q[i]
        if not s > 0:
            return p, it, -1.0
        for i in range(n):
            q[i] /= s
        if use_A:
            r = q @ A
            s2 = r.sum()
            for i in range(n):
                q[i] = r[i] / s2
        dist = 0.0
        for i in range(n):
            v = q[i]
            if v < 1e-290:
                v = 0.0
            d = abs(v - p[i])
            if d > dist:
                dist = d
            p[i] = v
        if dist < tol:
            return p, it + 1, dist
    return p, T, dist


@dataclass
class FixedPointResult:
    pi_hat: np.ndarray
    converged: bool
    iterations: int
    last_step: float
    condition_residual: float
    times: np.ndarray
    snapshots: np.ndarray
    bimodal_iterations: list = field(default_factory=list)

    @property
    def transient_bimodality(self) -> bool:
        return bool(self.bimodal_iterations)


def condition_residual(pi, kernels: KernelSet, kind: str = "W2",
                       threshold: float = SUPPORT_THRESHOLD) -> float:
    """max - min of W over the support; zero at a fixed point of the A = I map."""
    pi = np.asarray(pi, dtype=float)
    w = fitness_w(pi, kernels, kind)[pi > threshold]
    return float(w.max() - w.min())


def w2_capacity_residual(pi, kernels: KernelSet, threshold: float = SUPPORT_THRESHOLD) -> float:
    """Relative spread of K_x / (C * pi)_x on the support (zero when K = c (C * pi))."""
    pi = np.asarray(pi, dtype=float)
    r = (kernels.K / (kernels.Cmat @ pi))[pi > threshold]
    return float((r.max() - r.min()) / r.mean())


def iterate_to_fixed_point(pi0, kernels: KernelSet, kind: str = "W2", A=None, tol: float = 1e-13,
                           max_iter: int = 1_000_000, snapshot_every: int = 1000,
                           criterion: SpeciationCriterion | None = None) -> FixedPointResult:
    """Iterate the deterministic map until successive iterates differ by less than tol.

    Without mutation one step moves pi_x by pi_x (W_x / Wbar - 1), so at the
    stop pi_x |W_x - Wbar| < tol Wbar on the support; the unweighted spread of
    W can be much larger where pi_x is small.

    Snapshots are kept every ``snapshot_every`` iterations; iterations at which
    the snapshot is split into separated modes are listed in
    ``bimodal_iterations``.
    """
    _check_kind(kind)
    if not tol > 0:
        raise ValueError("tol must be positive")
    p = np.array(pi0, dtype=float)
    if p.shape != (kernels.n,):
        raise ValueError(f"initial state must have {kernels.n} entries")
    p /= p.sum()
    use_A = A is not None
    Am = check_mutation(A, kernels.n) if use_A else np.eye(1)
    Cm = np.ascontiguousarray(kernels.Cmat)
    K = np.ascontiguousarray(kernels.K)
    crit = criterion or SpeciationCriterion(min_separation=10, mass_radius=5)
    times, snaps, bimodal = [0], [p.copy()], []
    if is_speciated(p, crit):
        bimodal.append(0)
    done = 0
    converged = False
    dist = np.inf
    while done < max_iter:
        chunk = min(snapshot_every, max_iter - done)
        p, k, dist = _iterate(p, Cm, K, kind == "W1", chunk, tol, Am, use_A)
        if dist < 0:
            raise DegenerateStateError(f"mean fitness vanished at iteration {done + k}")
        done += k
        times.append(done)
        snaps.append(p.copy())
        if is_speciated(p, crit):
            bimodal.append(done)
        if k < chunk or dist < tol:
            converged = True
            break
    return FixedPointResult(p, converged, done, float(dist), condition_residual(p, kernels, kind),
                            np.array(times), np.array(snaps), bimodal)
