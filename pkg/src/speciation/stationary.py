"""Closed-form stationary law of the Moran/Fleming-Viot system and an MCMC sampler.

Up to normalization the stationary density on the open simplex is

    log nu(pi) = ((N/2) mu - 1) sum_x log pi_x + (N/2) mbar(pi) = (N/2) V(pi)

with V using mu_tilde = mu - 2/N.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .core import DomainError, KernelSet, ModelParams, potential
from .records import derive_rng


@dataclass(frozen=True)
class StationaryDensity:
    kernels: KernelSet
    params: ModelParams
    allow_boundary: bool = False

    def __post_init__(self):
        # mu_tilde = 0 still gives an integrable density since (N/2) mu > 0
        if self.allow_boundary and self.params.mu_tilde == 0:
            return
        self.params.require_positive_mu_tilde()

    @property
    def alpha(self) -> float:
        """Dirichlet-like exponent (N/2) mu."""
        return 0.5 * self.params.N * self.params.mu


def log_stationary_density(pi, density: StationaryDensity) -> float:
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0):
        return -math.inf
    N = density.params.N
    m = density.kernels.Q @ pi
    return float((density.alpha - 1.0) * np.log(pi).sum() + 0.5 * N * (pi @ m))


def log_density_via_potential(pi, density: StationaryDensity) -> float:
    return 0.5 * density.params.N * potential(pi, density.kernels, density.params.mu_tilde)


def _log_dirichlet(x, a):
    return float(gammaln(a.sum()) - gammaln(a).sum() + ((a - 1) * np.log(x)).sum())


@dataclass
class McmcResult:
    samples: np.ndarray
    log_density: np.ndarray
    acceptance_rate: float
    kappa: float
    rhat: np.ndarray
    warnings: list = field(default_factory=list)

    def mean(self):
        return self.samples.mean(axis=0)

    def batch_se(self, f=None, n_batches: int = 50):
        """Batch-means standard error of the mean of f(samples)."""
        x = self.samples if f is None else f(self.samples)
        nb = min(n_batches, x.shape[0])
        size = x.shape[0] // nb
        b = x[: nb * size].reshape(nb, size, *x.shape[1:]).mean(axis=1)
        return b.std(axis=0, ddof=1) / math.sqrt(nb)


def split_rhat(chain: np.ndarray) -> np.ndarray:
    """Potential scale reduction from the two halves of one chain, per coordinate."""
    h = chain.shape[0] // 2
    parts = np.stack([chain[:h], chain[h: 2 * h]])
    n = parts.shape[1]
    W = parts.var(axis=1, ddof=1).mean(axis=0)
    Bv = n * parts.mean(axis=1).var(axis=0, ddof=1)
    var = (n - 1) / n * W + Bv / n
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sqrt(np.where(W > 0, var / W, 1.0))


def mcmc_sample_stationary(density: StationaryDensity, n_samples: int, kappa: float = 100.0,
                           seed: int = 0, burn_in: int | None = None, thin: int = 1,
                           init=None, tune: bool = True) -> McmcResult:
    """Metropolis-Hastings on the open simplex with Dirichlet(kappa * pi) proposals.

    The proposal is centred at the current point but not symmetric, so the
    Hastings ratio includes the forward and reverse proposal densities.
    During burn-in kappa is adapted toward 20-40% acceptance.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    rng = derive_rng(seed, "mcmc")
    n = density.kernels.n
    burn_in = max(1000, n_samples // 2) if burn_in is None else burn_in
    x = np.full(n, 1.0 / n) if init is None else np.asarray(init, float)
    lx = log_stationary_density(x, density)
    if not np.isfinite(lx):
        raise DomainError("initial point must be interior")
    samples = np.empty((n_samples, n))
    logs = np.empty(n_samples)
    acc = tot = 0
    window_acc = 0
    total_steps = burn_in + n_samples * thin
    for step in range(total_steps):
        a_fwd = kappa * x
        y = rng.dirichlet(a_fwd)
        ok = False
        if np.all(y > 0):
            ly = log_stationary_density(y, density)
            if np.isfinite(ly):
                log_r = ly - lx + _log_dirichlet(x, kappa * y) - _log_dirichlet(y, a_fwd)
                ok = math.log(rng.random()) < log_r
        if ok:
            x, lx = y, ly
        if step < burn_in:
            window_acc += ok
            if tune and (step + 1) % 200 == 0:
                r = window_acc / 200
                if r < 0.2:
                    kappa *= 1.5
                elif r > 0.4:
                    kappa /= 1.5
                window_acc = 0
            continue
        acc += ok
        tot += 1
        j = step - burn_in
        if j % thin == 0:
            samples[j // thin] = x
            logs[j // thin] = lx
    rate = acc / max(tot, 1)
    notes = []
    if rate < 0.01:
        notes.append(f"acceptance rate {rate:.3%} below 1%; increase kappa")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    return McmcResult(samples, logs, rate, kappa, split_rhat(samples), notes)
