"""Closed-loop simulation and local stability under multi-loop integral control.

The plant is augmented with a bank of pure integrators du/dt = k * C @ (r - y)
(C from linear.controller_matrix), giving a 4-state closed loop whose
equilibria are exactly the (x = r, u = instance) pairs.  Local stability is
read off the augmented Jacobian; trajectories are integrated adaptively with
event-based termination (settled, or the inputs left their domain).
"""

from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernels
from .linear import PairingConfig, controller_matrix
from .model import DomainError
from .ode import IntegratorConfig, IntegrationError, integrate

_SETTLE_TOL = 1.0e-12


@dataclass
class IntegralLoopConfig:
    """Controller configuration for the integral closed loop.

    u_stop_box is the operating envelope (u1_lo, u1_hi, u2_lo, u2_hi): a
    trajectory leaving it is terminated and labeled "left-input-domain".
    Runaway inputs make the balances arbitrarily stiff (1/tau and the
    Arrhenius factors blow up), so divergence is detected at this box
    rather than at the mathematical domain boundary itself.
    """
    pairing: PairingConfig = field(default_factory=PairingConfig)
    k: float = 0.01                      # common integrator gain scale, 1/s
    r: tuple = (0.49, 0.37)              # output setpoint
    u_init: tuple = (0.914, 0.580)
    x_init: tuple = (0.49, 0.37)
    u_stop_box: tuple = (0.2, 2.0, 0.01, 0.99)
    rate_max: float = 1.0e3              # plant rate scale (-tr Jx) that ends a run

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("integrator gain scale k must be positive")
        u1, u2 = self.u_init
        if not (u1 > 0 and 0 < u2 < 1):
            raise DomainError(f"u_init {self.u_init} outside the input domain")


@dataclass
class ILoopResult:
    t_trace: np.ndarray
    z_trace: np.ndarray      # columns x1, x2, u1, u2
    reason: str              # "converged" | "left-input-domain" | "max-time"
    instance: int = -1       # 0-based index into targets when converged near one


def closed_loop_rhs(params, cfg, z):
    """Derivative of the augmented state z = (x1, x2, u1, u2).

    Raises DomainError when the input block of z is outside its domain; the
    simulator instead terminates the trajectory there and labels it.
    """
    z = np.asarray(z, dtype=float)
    u = z[2:]
    if not (u[0] > 0 and 0 < u[1] < 1):
        raise DomainError(f"inputs {tuple(u)} left the domain")
    return _cl_rhs(params.as_array(), cfg, z)


def _cl_rhs(p, cfg, z):
    C = controller_matrix(cfg.pairing)
    r = np.asarray(cfg.r, dtype=float)
    dx = kernels.rhs(p, z[:2], z[2:])
    du = cfg.k * (C @ (r - z[:2]))
    return np.concatenate([dx, du])


def augmented_jacobian(params, cfg, u_eq):
    """Jacobian of the closed loop at (x = r, u = u_eq):
    [[df/dx, df/du], [-k*C, 0]]."""
    p = params.as_array()
    r = np.asarray(cfg.r, dtype=float)
    uv = np.asarray(getattr(u_eq, "as_array", lambda: u_eq)(), dtype=float)
    C = controller_matrix(cfg.pairing)
    A = np.zeros((4, 4))
    A[:2, :2] = kernels.jac_x(p, r, uv)
    A[:2, 2:] = kernels.jac_u(p, r, uv)
    A[2:, :2] = -cfg.k * C
    return A


def local_stability(params, cfg, u_eq):
    """Eigenvalues of the augmented 4x4 Jacobian and the Hurwitz flag."""
    eig = np.linalg.eigvals(augmented_jacobian(params, cfg, u_eq))
    eig = eig[np.argsort(-eig.real)]
    return eig, bool(np.all(eig.real < 0.0))


def stability_map(params, cfg, u_instances, k_values):
    """Hurwitz flags over a k sweep: {k: [flag per instance]}.

    Used to locate gain scales at which exactly one instance is locally
    stable under a fixed pairing/sign choice.
    """
    out = {}
    for k in k_values:
        cfg_k = IntegralLoopConfig(pairing=cfg.pairing, k=float(k), r=cfg.r,
                                   u_init=cfg.u_init, x_init=cfg.x_init)
        out[float(k)] = [local_stability(params, cfg_k, u)[1] for u in u_instances]
    return out


def simulate(params, cfg, t_final=1.0e4, t_eval=None, targets=None,
             target_tol=1.0e-4, integrator=None):
    """Integrate the integral-control closed loop from (x_init, u_init).

    Stops early when the full derivative settles below 1e-12 (converged) or
    the inputs approach their domain boundary (left-input-domain); otherwise
    runs to t_final (max-time).  When targets (input instances) are given,
    a converged run is matched against them within target_tol (max-norm).
    """
    p = params.as_array()
    z0 = np.concatenate([np.asarray(cfg.x_init, float),
                         np.asarray(cfg.u_init, float)])
    if integrator is None:
        integrator = IntegratorConfig(method="rk45-adaptive", step=1e-3,
                                      rtol=1e-8, atol=1e-10)

    C = controller_matrix(cfg.pairing)
    rset = np.asarray(cfg.r, dtype=float)
    kscale = cfg.k

    def f(t, z):
        dz = np.empty(4)
        dz[:2] = kernels.rhs(p, z[:2], z[2:])
        dz[2:] = kscale * (C @ (rset - z[:2]))
        return dz

    lo1, hi1, lo2, hi2 = cfg.u_stop_box

    def stop(t, z):
        u1, u2 = z[2], z[3]
        if not (lo1 <= u1 <= hi1 and lo2 <= u2 <= hi2):
            return "left-input-domain"
        # divergence guard: runaway inputs make the plant arbitrarily fast
        # long before the position box is reached (quasi-equilibrated x keeps
        # |f| small, so the Jacobian scale is the reliable signal)
        if -np.trace(kernels.jac_x(p, z[:2], z[2:])) > cfg.rate_max:
            return "left-input-domain"
        if np.max(np.abs(f(t, z))) < _SETTLE_TOL:
            return "converged"
        return None

    try:
        res = integrate(f, z0, (0.0, t_final), integrator, t_eval=t_eval,
                        stop=stop)
        reason = res.reason if res.status == "event" else "max-time"
        t_trace, z_trace = res.t_trace, res.x_trace
        z_end = res.x
    except IntegrationError as err:
        # blow-ups here come from the inputs running away; label, keep trace
        u1, u2 = err.x_last[2], err.x_last[3]
        margin1 = 0.05 * (hi1 - lo1)
        margin2 = 0.05 * (hi2 - lo2)
        if (u1 <= lo1 + margin1 or u1 >= hi1 - margin1
                or u2 <= lo2 + margin2 or u2 >= hi2 - margin2):
            reason = "left-input-domain"
        else:
            raise
        t_trace = np.array([0.0, err.t_last])
        z_trace = np.vstack([z0, err.x_last])
        z_end = err.x_last

    instance = -1
    # max-time endpoints count as converged-near-target only when the loop
    # has essentially settled; a bounded wandering trajectory stays unmatched
    settled = reason == "converged" or (
        reason == "max-time" and np.max(np.abs(f(0.0, z_end))) < 1e-6)
    if settled and targets is not None:
        for i, tg in enumerate(np.asarray(targets, float).reshape(-1, 2)):
            if np.max(np.abs(z_end[2:] - tg)) < target_tol:
                instance = i
                break
    return ILoopResult(t_trace=t_trace, z_trace=z_trace, reason=reason,
                       instance=instance)
