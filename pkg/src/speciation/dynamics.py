"""Deterministic limits of the Moran system and an adaptive RK integrator.

Three vector fields on the simplex:

* ``eq6``  selection only, sigma * pi * (m - mbar)
* ``eq7``  selection plus mutation, adds (mu/2)(1 - n pi)
* ``eq9``  the gradient flow of V, pi (m - mbar) + (mu_tilde/2)(1 - n pi)

The integrator is a Dormand-Prince 5(4) pair written out by hand because
every accepted step is followed by a simplex repair (clip at 1e-14,
renormalize), and for eq9 the potential is tracked step by step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, KernelSet, ModelParams, potential, tangent_basis

VARIANTS = ("eq6", "eq7", "eq9")
REPAIR_FLOOR = 1e-14


def _coeffs(params: ModelParams | None, variant, sigma, mu, mu_tilde):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if params is not None:
        sigma = params.sigma if sigma is None else sigma
        mu = params.mu if mu is None else mu
        mu_tilde = params.mu_tilde if mu_tilde is None else mu_tilde
    if variant == "eq9":
        if mu_tilde is None:
            raise ValueError("eq9 needs mu_tilde")
        return 1.0, float(mu_tilde)
    if sigma is None:
        raise ValueError(f"{variant} needs sigma")
    if variant == "eq6":
        return float(sigma), 0.0
    if mu is None:
        raise ValueError("eq7 needs mu")
    return float(sigma), float(mu)


def make_rhs(kernels: KernelSet, variant="eq9", params: ModelParams | None = None,
             sigma=None, mu=None, mu_tilde=None):
    """Return f(pi) for the chosen variant. All three share the form
    s * pi * (m - mbar) + (c/2)(1 - n pi)."""
    s, c = _coeffs(params, variant, sigma, mu, mu_tilde)
    Q = np.ascontiguousarray(kernels.Q)
    n = kernels.n
    half_c = 0.5 * c

    def f(pi):
        m = Q @ pi
        return s * pi * (m - pi @ m) + half_c * (1.0 - n * pi)

    return f


def ode_rhs(pi, kernels: KernelSet, params: ModelParams | None = None, variant="eq9",
            *, sigma=None, mu=None, mu_tilde=None) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (kernels.n,):
        raise ValueError(f"distribution has shape {pi.shape}, kernels expect ({kernels.n},)")
    if variant == "eq9" and np.any(pi <= 0):
        raise DomainError("eq9 is only defined on the open simplex")
    return make_rhs(kernels, variant, params, sigma, mu, mu_tilde)(pi)


def jacobian(pi, kernels: KernelSet, variant="eq9", params=None, *, sigma=None, mu=None,
             mu_tilde=None) -> np.ndarray:
    """Analytic Jacobian d rhs_x / d pi_z in ambient coordinates."""
    s, c = _coeffs(params, variant, sigma, mu, mu_tilde)
    pi = np.asarray(pi, dtype=float)
    Q = kernels.Q
    m = Q @ pi
    mbar = pi @ m
    n = kernels.n
    J = s * pi[:, None] * (Q - 2.0 * m[None, :])
    J[np.diag_indices(n)] += s * (m - mbar) - 0.5 * c * n
    return J


def tangent_eigenvalues(pi, kernels: KernelSet, mu_tilde: float) -> np.ndarray:
    """Eigenvalues of the eq9 Jacobian restricted to {sum v = 0}, sorted descending.

    On the open simplex this is similar to a symmetric matrix, so the spectrum
    is real up to rounding.
    """
    U = tangent_basis(kernels.n)
    J = jacobian(pi, kernels, "eq9", mu_tilde=mu_tilde)
    ev = np.linalg.eigvals(U.T @ J @ U).real
    return np.sort(ev)[::-1]


def shahshahani_gradient(pi, kernels: KernelSet, mu_tilde: float, scale: float = 1.0):
    """G grad(scale * V) with metric g^{xy} = pi_x (delta_xy - pi_y)."""
    pi = np.asarray(pi, dtype=float)
    grad = scale * (2.0 * (kernels.Q @ pi) + mu_tilde / pi)
    return pi * grad - pi * (pi @ grad)


def dvdt(pi, kernels: KernelSet, mu_tilde: float) -> float:
    """Closed-form time derivative of V along eq9."""
    pi = np.asarray(pi, dtype=float)
    m = kernels.Q @ pi
    u = m + mu_tilde / (2 * pi) - pi @ m - 0.5 * mu_tilde * kernels.n
    return float(2.0 * np.sum(pi * u * u))


def dvdt_chain_rule(pi, kernels: KernelSet, mu_tilde: float) -> float:
    pi = np.asarray(pi, dtype=float)
    grad = 2.0 * (kernels.Q @ pi) + mu_tilde / pi
    return float(grad @ ode_rhs(pi, kernels, variant="eq9", mu_tilde=mu_tilde))


def repair(pi, floor=REPAIR_FLOOR):
    out = np.maximum(pi, floor)
    return out / out.sum()


# Dormand-Prince 5(4)
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
_AM = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _AM[_i, : len(_row)] = _row


@dataclass
class OdeResult:
    t: np.ndarray
    states: np.ndarray
    terminal: np.ndarray
    t_final: float
    status: str
    n_steps: int = 0
    n_rejected: int = 0
    max_v_decrease: float = 0.0
    velocity: float = np.nan
    message: str = ""
    v_path: np.ndarray | None = field(default=None, repr=False)

    @property
    def success(self) -> bool:
        return self.status in ("horizon", "stationary")


def integrate_ode(pi0, kernels: KernelSet, horizon: float, variant="eq9", params=None, *,
                  sigma=None, mu=None, mu_tilde=None, rtol=1e-8, atol=1e-12, h0=None,
                  t_eval=None, stop_velocity=None, max_steps=2_000_000, record_v=False,
                  floor=REPAIR_FLOOR) -> OdeResult:
    """Integrate one of the simplex flows with adaptive Dormand-Prince steps.

    ``t_eval``: times at which to record the state; steps are shortened to
    land on them exactly. Without it every accepted step is recorded.
    ``stop_velocity``: stop early once the sup-norm of the vector field drops
    below this value (status ``"stationary"``).
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    y = np.array(pi0, dtype=float)
    if y.shape != (kernels.n,):
        raise ValueError(f"initial state has shape {y.shape}, expected ({kernels.n},)")
    if variant == "eq9" and np.any(y <= 0):
        raise DomainError("eq9 needs a strictly interior initial state")
    y = repair(y, floor)
    f = make_rhs(kernels, variant, params, sigma, mu, mu_tilde)
    track_v = variant == "eq9"
    mt = _coeffs(params, variant, sigma, mu, mu_tilde)[1] if track_v else 0.0

    record_all = t_eval is None
    if record_all:
        marks = np.empty(0)
        ts_out, ys_out = [0.0], [y.copy()]
    else:
        te = np.unique(np.asarray(t_eval, dtype=float))
        if np.any(te < 0) or np.any(te > horizon):
            raise ValueError("t_eval must lie in [0, horizon]")
        ts_out, ys_out = ([0.0], [y.copy()]) if te.size and te[0] == 0.0 else ([], [])
        marks = te[te > 0]
    stop_at = horizon

    k = np.empty((7, y.size))
    k[0] = f(y)
    vel = float(np.max(np.abs(k[0])))
    v_prev = potential(y, kernels, mt) if track_v else 0.0
    v_path = [v_prev] if record_v else None
    max_dec = 0.0
    t = 0.0
    if h0 is None:
        h = min(0.1, 0.01 / max(vel, 1e-12), horizon)
    else:
        h = h0
    n_steps = n_rej = 0
    mark_i = 0
    status = "horizon"
    msg = ""

    if stop_velocity is not None and vel < stop_velocity:
        status = "stationary"
        stop_at = t
    while status == "horizon" and t < stop_at:
        if n_steps + n_rej >= max_steps:
            status, msg = "max_steps", f"step budget {max_steps} exhausted at t={t:.6g}"
            break
        target = marks[mark_i] if mark_i < marks.size else horizon
        h_try = min(h, target - t)
        hard_land = h_try < h or h_try == target - t
        if h_try <= 1e-12 * max(1.0, t):
            if target - t <= 1e-12 * max(1.0, t):
                t = target
                h_try = 0.0
            else:
                status, msg = "underflow", f"step size underflow at t={t:.6g}"
                break
        if h_try > 0:
            for i in range(1, 7):
                yi = y + h_try * (_AM[i, :i] @ k[:i])
                k[i] = f(yi)
            y5 = y + h_try * (_B5 @ k)
            err_vec = h_try * (_E @ k)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not np.isfinite(err) or err > 1.0:
                n_rej += 1
                fac = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
                h = h_try * fac
                continue
            n_steps += 1
            t = t + h_try
            if hard_land and abs(t - target) < 1e-9 * max(1.0, target):
                t = target
            y = repair(y5, floor)
            k[0] = f(y)
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = max(h, h_try) * fac if hard_land else h_try * fac
            vel = float(np.max(np.abs(k[0])))
            if track_v:
                v_new = potential(y, kernels, mt)
                max_dec = max(max_dec, v_prev - v_new)
                v_prev = v_new
                if record_v:
                    v_path.append(v_new)
            if record_all:
                ts_out.append(t)
                ys_out.append(y.copy())
        if not record_all and mark_i < marks.size and t >= marks[mark_i]:
            ts_out.append(t)
            ys_out.append(y.copy())
            mark_i += 1
        if stop_velocity is not None and vel < stop_velocity:
            status = "stationary"
            break
        if t >= horizon:
            break

    states = np.array(ys_out) if ys_out else np.empty((0, y.size))
    return OdeResult(
        t=np.array(ts_out), states=states, terminal=y, t_final=t, status=status,
        n_steps=n_steps, n_rejected=n_rej, max_v_decrease=max(0.0, max_dec), velocity=vel,
        message=msg, v_path=np.array(v_path) if record_v else None,
    )
