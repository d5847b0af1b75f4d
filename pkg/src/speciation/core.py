"""Phenotype lattice, interaction kernels and the quadratic fitness landscape.

Everything here is pure numpy. Distributions on the lattice E = [-L, L] are
plain float arrays of length 2L+1 where index i corresponds to site x = i - L.
Kernels that depend on a displacement (B, C) are stored for z = -2L..2L, so
``B[z + 2L]`` is B_z.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

SUM_RENORM_TOL = 1e-12
SUM_REJECT_TOL = 1e-6
K_FLOOR = 1e-300


class ConfigError(ValueError):
    """Invalid parameter; ``field`` names the offending entry."""

    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class DomainError(ValueError):
    """A numerical routine was asked to work outside its domain."""


class DegenerateStateError(ValueError):
    """State that a routine cannot process (e.g. extinct population)."""


@dataclass(frozen=True)
class PhenotypeSpace:
    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError("L", f"half-width must be a positive integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))

    @property
    def size(self) -> int:
        return 2 * self.L + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1)

    def index(self, x: int) -> int:
        if abs(x) > self.L:
            raise ValueError(f"site {x} outside [-{self.L}, {self.L}]")
        return int(x) + self.L

    def delta(self, x: int) -> np.ndarray:
        pi = np.zeros(self.size)
        pi[self.index(x)] = 1.0
        return pi

    def uniform(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)

    def displacements(self) -> np.ndarray:
        return np.arange(-2 * self.L, 2 * self.L + 1)


def as_simplex(weights, size: int | None = None) -> np.ndarray:
    """Validate a probability vector and return a renormalized float copy.

    Small drift (above 1e-12) is renormalized away; a sum off by more than
    1e-6 or a negative entry is treated as a caller bug.
    """
    pi = np.array(weights, dtype=float)
    if pi.ndim != 1:
        raise ValueError(f"distribution must be 1-d, got shape {pi.shape}")
    if size is not None and pi.size != size:
        raise ValueError(f"distribution has {pi.size} entries, expected {size}")
    if not np.all(np.isfinite(pi)):
        raise ValueError("distribution has non-finite entries")
    if np.any(pi < 0):
        raise ValueError(f"negative weight {pi.min():.3g} in distribution")
    s = pi.sum()
    if abs(s - 1.0) > SUM_REJECT_TOL:
        raise ValueError(f"weights sum to {s!r}, not 1")
    if abs(s - 1.0) > SUM_RENORM_TOL:
        pi /= s
    return pi


def _check_symmetric(arr: np.ndarray, name: str):
    if not np.allclose(arr, arr[::-1], rtol=0, atol=1e-15):
        raise ConfigError(name, "kernel must be symmetric in the displacement")


@dataclass(frozen=True, eq=False)
class KernelSet:
    """Carrying capacity K on E and displacement kernels B, C on [-2L, 2L].

    ``b`` and ``M`` are set when B has the step form b + (1-b)1{|z| >= M}.
    """

    space: PhenotypeSpace
    K: np.ndarray
    B: np.ndarray
    C: np.ndarray
    b: float | None = None
    M: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n, nd = self.space.size, 4 * self.space.L + 1
        K = np.array(self.K, dtype=float)
        B = np.array(self.B, dtype=float)
        C = np.array(self.C, dtype=float)
        if K.shape != (n,):
            raise ConfigError("K", f"expected {n} entries, got {K.shape}")
        for name, arr in (("B", B), ("C", C)):
            if arr.shape != (nd,):
                raise ConfigError(name, f"expected {nd} displacement entries, got {arr.shape}")
            if np.any(arr < 0) or np.any(arr > 1):
                raise ConfigError(name, "values must lie in [0, 1]")
            _check_symmetric(arr, name)
        if np.any(K <= 0):
            raise ConfigError("K", "carrying capacity must be strictly positive")
        for arr in (K, B, C):
            arr.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def L(self) -> int:
        return self.space.L

    @property
    def n(self) -> int:
        return self.space.size

    def K_at(self, x: int) -> float:
        """K_x, with 0 returned for sites outside E."""
        if abs(x) > self.L:
            return 0.0
        return float(self.K[x + self.L])

    def B_at(self, z: int) -> float:
        return float(self.B[z + 2 * self.L])

    def C_at(self, z: int) -> float:
        return float(self.C[z + 2 * self.L])

    def _displacement_matrix(self, kern: np.ndarray) -> np.ndarray:
        x = self.space.sites
        return kern[(x[:, None] - x[None, :]) + 2 * self.L]

    @cached_property
    def Bmat(self) -> np.ndarray:
        out = self._displacement_matrix(self.B)
        out.setflags(write=False)
        return out

    @cached_property
    def Cmat(self) -> np.ndarray:
        out = self._displacement_matrix(self.C)
        out.setflags(write=False)
        return out

    @cached_property
    def Q(self) -> np.ndarray:
        """Symmetric interaction matrix Q_xz = K_x B_{x-z} K_z, so m = Q pi."""
        out = self.K[:, None] * self.Bmat * self.K[None, :]
        out.setflags(write=False)
        return out

    def is_assumption1(self, tol: float = 1e-15) -> bool:
        K = self.K
        if abs(K[self.L] - 1.0) > tol or not np.allclose(K, K[::-1], rtol=0, atol=tol):
            return False
        left = K[: self.L + 1]
        if np.any(np.diff(left) < -tol):
            return False
        if self.b is None or self.M is None:
            return False
        return np.allclose(self.B, step_cooperation(self.space, self.b, self.M), rtol=0, atol=tol)


@dataclass(frozen=True)
class ModelParams:
    sigma: float = 0.5
    mu: float = 1e-3
    N: int = 1000

    def __post_init__(self):
        if not (0 < self.sigma <= 0.5):
            raise ConfigError("sigma", f"selection strength must be in (0, 1/2], got {self.sigma}")
        if not self.mu > 0:
            raise ConfigError("mu", f"mutation rate must be positive, got {self.mu}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError("N", f"population size must be a positive integer, got {self.N}")

    @property
    def mu_tilde(self) -> float:
        return self.mu - 2.0 / self.N

    def require_positive_mu_tilde(self):
        if self.mu_tilde <= 0:
            raise DomainError(
                f"effective mutation mu - 2/N = {self.mu_tilde:.3g} must be positive "
                f"(mu={self.mu}, N={self.N})"
            )


def _check_dim(pi: np.ndarray, kernels: KernelSet):
    if pi.shape != (kernels.n,):
        raise ValueError(f"distribution has shape {pi.shape}, kernels expect ({kernels.n},)")


def fitness(pi, kernels: KernelSet) -> np.ndarray:
    """m_x = K_x sum_z B_{x-z} K_z pi_z."""
    pi = np.asarray(pi, dtype=float)
    _check_dim(pi, kernels)
    return kernels.Q @ pi


def mean_fitness(pi, m) -> float:
    pi = np.asarray(pi, dtype=float)
    m = np.asarray(m, dtype=float)
    if pi.shape != m.shape:
        raise ValueError(f"shape mismatch {pi.shape} vs {m.shape}")
    return float(pi @ m)


def potential(pi, kernels: KernelSet, mu_tilde: float) -> float:
    """V = mbar + mu_tilde * sum log pi; -inf if any coordinate is zero."""
    pi = np.asarray(pi, dtype=float)
    _check_dim(pi, kernels)
    if np.any(pi <= 0):
        return -math.inf
    m = kernels.Q @ pi
    return float(pi @ m + mu_tilde * np.log(pi).sum())


def sup_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b)))


def tangent_basis(n: int) -> np.ndarray:
    """Orthonormal n x (n-1) basis of {v : sum v = 0}."""
    A = np.eye(n)[:, :-1] - 1.0 / n
    q, _ = np.linalg.qr(A)
    return q


# kernel constructors


def gaussian_capacity(space: PhenotypeSpace, sigma=None, variance=None, scale=1.0, center=0.0):
    s2 = _resolve_variance(sigma, variance, "capacity")
    x = space.sites.astype(float)
    K = scale * np.exp(-((x - center) ** 2) / (2 * s2))
    if np.any(K < K_FLOOR):
        warnings.warn("Gaussian capacity underflows; clamping at 1e-300", RuntimeWarning, stacklevel=2)
        K = np.maximum(K, K_FLOOR)
    return K


def gaussian_kernel(space: PhenotypeSpace, sigma=None, variance=None):
    """exp(-z^2 / (2 s^2)) on displacements; infinite width gives all ones."""
    s2 = _resolve_variance(sigma, variance, "kernel")
    z = space.displacements().astype(float)
    if math.isinf(s2):
        return np.ones(z.size)
    return np.exp(-(z**2) / (2 * s2))


def step_cooperation(space: PhenotypeSpace, b: float, M: int) -> np.ndarray:
    z = space.displacements()
    return np.where(np.abs(z) >= M, 1.0, float(b))


def rectangular(space: PhenotypeSpace, width: int, on_sites: bool = False) -> np.ndarray:
    """Indicator 1{|x| <= width} on sites or on displacements."""
    z = space.sites if on_sites else space.displacements()
    return (np.abs(z) <= width).astype(float)


def _resolve_variance(sigma, variance, name):
    if (sigma is None) == (variance is None):
        raise ConfigError(name, "give exactly one of sigma or variance")
    s2 = float(variance) if variance is not None else float(sigma) ** 2
    if not s2 > 0:
        raise ConfigError(name, f"width must be positive, got {s2}")
    return s2


def _build_component(space, spec: Mapping, name: str, on_sites: bool):
    kind = spec.get("kind")
    if kind == "gaussian":
        if on_sites:
            return gaussian_capacity(space, spec.get("sigma"), spec.get("variance"),
                                     spec.get("scale", 1.0), spec.get("center", 0.0))
        return gaussian_kernel(space, spec.get("sigma"), spec.get("variance"))
    if kind == "step":
        if on_sites:
            raise ConfigError(name, "step form is only defined for B")
        return step_cooperation(space, spec["b"], spec["M"])
    if kind == "rectangular":
        return rectangular(space, int(spec["width"]), on_sites=on_sites)
    if kind == "constant":
        nn = space.size if on_sites else 4 * space.L + 1
        return np.full(nn, float(spec.get("value", 1.0)))
    if kind == "values":
        return np.asarray(spec["values"], dtype=float)
    raise ConfigError(name, f"unknown kernel kind {kind!r}")


def build_kernels(spec: Mapping) -> KernelSet:
    """Build a KernelSet from a plain dict.

    Example::

        {"L": 14,
         "capacity": {"kind": "gaussian", "variance": 10},
         "cooperation": {"kind": "step", "b": 0.01, "M": 10}}

    Missing B or C defaults to the complement of the other (B = 1 - C);
    with neither given both are constant one.
    """
    if "L" not in spec:
        raise ConfigError("L", "missing lattice half-width")
    space = PhenotypeSpace(spec["L"])
    cap = spec.get("capacity", {"kind": "constant", "value": 1.0})
    b = M = None
    coop = spec.get("cooperation")
    if coop is not None and coop.get("kind") == "step":
        b, M = float(coop["b"]), int(coop["M"])
        if not 0 <= b <= 1:
            raise ConfigError("cooperation.b", f"must lie in [0, 1], got {b}")
        if not 1 <= M <= 2 * space.L:
            raise ConfigError("cooperation.M", f"must lie in [1, {2 * space.L}], got {M}")
    K = _build_component(space, cap, "capacity", True)
    if spec.get("assumption1") and cap.get("kind") == "gaussian":
        K = K / K[space.L]
    B = _build_component(space, coop, "cooperation", False) if coop is not None else None
    comp = spec.get("competition")
    C = _build_component(space, comp, "competition", False) if comp is not None else None
    if B is None and C is None:
        B = np.ones(4 * space.L + 1)
        C = np.ones(4 * space.L + 1)
    elif B is None:
        B = 1.0 - C
    elif C is None:
        C = 1.0 - B
    return KernelSet(space, K, B, C, b=b, M=M, meta=dict(spec))


def assumption1_kernels(L: int, b: float, M: int, K=None, capacity_variance=None) -> KernelSet:
    """Step cooperation with either explicit K values or a Gaussian of given variance."""
    space = PhenotypeSpace(L)
    if K is None:
        if capacity_variance is None:
            raise ConfigError("capacity", "give K values or a capacity variance")
        K = gaussian_capacity(space, variance=capacity_variance)
    if not 0 <= b <= 1:
        raise ConfigError("b", f"must lie in [0, 1], got {b}")
    if not 1 <= M <= 2 * L:
        raise ConfigError("M", f"must lie in [1, {2 * L}], got {M}")
    B = step_cooperation(space, b, M)
    return KernelSet(space, np.asarray(K, float), B, 1.0 - B, b=float(b), M=int(M))


def random_assumption1_kernels(rng: np.random.Generator, L: int, b=None, M=None,
                               strict: bool = True) -> KernelSet:
    """Random symmetric unimodal K with K_0 = 1 plus a random step B.

    ``strict`` makes K strictly decreasing away from the origin.
    """
    if b is None:
        b = float(rng.uniform(0, 1))
    if M is None:
        M = int(rng.integers(1, 2 * L + 1))
    steps = rng.uniform(0.02 if strict else 0.0, 1.0, size=L)
    half = np.cumprod(1.0 - 0.9 * steps)
    K = np.concatenate([half[::-1], [1.0], half])
    return assumption1_kernels(L, b, M, K=K)


def random_simplex(rng: np.random.Generator, n: int, alpha: float = 1.0) -> np.ndarray:
    return as_simplex(rng.dirichlet(np.full(n, alpha)))
