"""Moran particle system with frequency-dependent selection and uniform mutation.

N individuals carry phenotypes in E. Transitions x -> y (one individual
switches type) happen at rate

    selection  (N/2) pi_x pi_y (1/2 + sigma (m_y - m_x))
    mutation   (N/2) mu pi_x            for every target y in E

The total proposal rate (N/2)(1 + mu n) does not depend on the state, so the
chain is simulated by uniformization: a Poisson clock of that rate proposes
either a pairwise resampling (pick two individuals, accept the replacement
with probability 1/2 + sigma (m_y - m_x)) or a mutation (pick an individual
and a uniform target). Each accepted move costs O(n) to update m.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import KernelSet, ModelParams
from .modes import SpeciationCriterion, is_speciated
from .records import RunRecord, derive_rng

RECOMPUTE_EVERY = 1 << 20


@dataclass(frozen=True)
class MoranParams:
    kernels: KernelSet
    params: ModelParams

    def __post_init__(self):
        K, B = self.kernels.K, self.kernels.B
        if K.max() <= 1 and B.max() <= 1 and self.params.sigma > 0.5:
            raise ValueError("sigma above 1/2 can make selection rates negative")

    @property
    def N(self):
        return self.params.N


def _as_params(p, params):
    if isinstance(p, MoranParams):
        return p
    return MoranParams(p, params)


def moran_rates(counts, p: MoranParams, params: ModelParams | None = None):
    """Selection and mutation rate tables indexed [x, y] (site indices)."""
    p = _as_params(p, params)
    counts = np.asarray(counts)
    N = p.params.N
    if counts.sum() != N:
        raise ValueError(f"state holds {counts.sum()} individuals, expected N={N}")
    pi = counts / N
    m = p.kernels.Q @ pi
    accept = 0.5 + p.params.sigma * (m[None, :] - m[:, None])
    sel = (N / 2) * pi[:, None] * accept * pi[None, :]
    np.fill_diagonal(sel, 0.0)
    if np.any(sel < 0):
        x, y = np.unravel_index(np.argmin(sel), sel.shape)
        L = p.kernels.L
        raise ValueError(f"negative selection rate for {x - L} -> {y - L}: {sel[x, y]:.3g}")
    mut = np.repeat(((N / 2) * p.params.mu * pi)[:, None], pi.size, axis=1)
    np.fill_diagonal(mut, 0.0)
    return sel, mut


@njit(cache=True)
def _moran_segment(types, counts, m, Q, sigma, mu, t, t_end, rng_clock, rng_choice,
                   rng_mut, mirror, since_recompute):
    N = types.shape[0]
    n = counts.shape[0]
    total = 0.5 * N * (1.0 + mu * n)
    p_sel = 1.0 / (1.0 + mu * n)
    moves = 0
    cands = 0
    while True:
        t += rng_clock.standard_exponential() / total
        if t > t_end:
            break
        cands += 1
        i = rng_choice.integers(0, N)
        x = types[i]
        if rng_choice.random() < p_sel:
            y = types[rng_choice.integers(0, N)]
            if y == x:
                continue
            if rng_choice.random() >= 0.5 + sigma * (m[y] - m[x]):
                continue
        else:
            y = rng_mut.integers(0, n)
            if mirror:
                y = n - 1 - y
            if y == x:
                continue
        types[i] = y
        counts[x] -= 1
        counts[y] += 1
        for z in range(n):
            m[z] += (Q[z, y] - Q[z, x]) / N
        moves += 1
        since_recompute += 1
        if since_recompute >= 1048576:
            for z in range(n):
                acc = 0.0
                for w in range(n):
                    acc += Q[z, w] * counts[w]
                m[z] = acc / N
            since_recompute = 0
    return moves, cands, since_recompute


def initial_counts(kernels: KernelSet, N: int, initial=None) -> np.ndarray:
    """Counts vector from None (all at 0), a site index, or a count/frequency vector."""
    n = kernels.n
    if initial is None:
        c = np.zeros(n, dtype=np.int64)
        c[kernels.L] = N
        return c
    if np.isscalar(initial):
        c = np.zeros(n, dtype=np.int64)
        c[kernels.space.index(int(initial))] = N
        return c
    a = np.asarray(initial, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"initial state must have {n} entries")
    if np.all(a == np.round(a)) and a.sum() == N:
        return a.astype(np.int64)
    # largest-remainder rounding of a frequency vector
    a = a / a.sum() * N
    c = np.floor(a).astype(np.int64)
    rem = N - c.sum()
    c[np.argsort(-(a - c), kind="stable")[:rem]] += 1
    return c


def run_moran(p, params: ModelParams | None = None, horizon: float = 100.0,
              snapshot_interval: float | None = 5.0, snapshot_times=None, seed: int = 0,
              replica: int = 0, initial=None, stop_on_speciation: bool = False,
              criterion: SpeciationCriterion | None = None, mirror: bool = False) -> RunRecord:
    """Simulate the chain up to ``horizon`` and record count snapshots.

    ``mirror=True`` reflects the initial individuals and every mutation draw
    through x -> -x; with symmetric kernels this yields the reflected
    trajectory of the unmirrored run with the same seed.
    """
    p = _as_params(p, params)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    k = p.kernels
    N, n = p.params.N, k.n
    if snapshot_times is None:
        if snapshot_interval is None or snapshot_interval <= 0:
            raise ValueError("need a positive snapshot interval or explicit times")
        snapshot_times = np.arange(0.0, horizon + 0.5 * snapshot_interval, snapshot_interval)
    snaps_t = np.unique(np.clip(np.asarray(snapshot_times, float), 0, horizon))
    counts = initial_counts(k, N, initial)
    types = np.repeat(np.arange(n, dtype=np.int64), counts)
    if mirror:
        types = n - 1 - types
        counts = counts[::-1].copy()
    Q = np.ascontiguousarray(k.Q)
    m = Q @ (counts / N)
    rc = derive_rng(seed, replica, "clock")
    rs = derive_rng(seed, replica, "choice")
    rm = derive_rng(seed, replica, "mutation")
    crit = criterion or SpeciationCriterion()
    out_t, out_s = [], []
    moves = cands = since = 0
    t = 0.0
    t_spec = None
    w0 = time.perf_counter()
    for ts in snaps_t:
        if ts > t:
            # restarting the exponential clock at a snapshot is exact (memoryless)
            mv, cd, since = _moran_segment(types, counts, m, Q, p.params.sigma, p.params.mu,
                                           t, ts, rc, rs, rm, mirror, since)
            moves += mv
            cands += cd
            t = ts
        out_t.append(t)
        out_s.append(counts.copy())
        if t_spec is None and is_speciated(counts, crit):
            t_spec = t
            if stop_on_speciation:
                break
    rec = RunRecord("moran", seed, replica, np.array(out_t), np.array(out_s), k.space.sites,
                    moves, cands, t_spec, None, time.perf_counter() - w0)
    rec.extra["criterion"] = crit.to_dict()
    return rec
