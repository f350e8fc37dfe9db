"""Explicit ODE integration: fixed-step RK4 and embedded RKF4(5).

Small, dependency-free integrators for the low-dimensional systems in this
package.  The adaptive method is the classic Fehlberg 4(5) pair (six stages,
4th-order propagation, 5th-order error estimate); steps are clipped to land
exactly on requested sample times, so traces are reproducible.
"""

from dataclasses import dataclass

import numpy as np


class IntegrationError(RuntimeError):
    """Integration failed; carries the last good time and state."""

    def __init__(self, message, t_last, x_last):
        super().__init__(f"{message} (last good t = {t_last:.9g})")
        self.t_last = t_last
        self.x_last = np.array(x_last)


@dataclass
class IntegratorConfig:
    method: str = "rk45-adaptive"   # "rk45-adaptive" | "rk4-fixed"
    step: float = 1.0e-3            # fixed step, or initial step when adaptive
    rtol: float = 1.0e-8
    atol: float = 1.0e-10
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.method not in ("rk45-adaptive", "rk4-fixed"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.step <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise ValueError("step and tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class IntegrationResult:
    t: float
    x: np.ndarray
    t_trace: np.ndarray
    x_trace: np.ndarray
    status: str            # "finished" | "event"
    reason: str            # event label when status == "event"
    n_steps: int


def steady_state_event(f, tol=1.0e-10):
    """Termination event: fires when the vector field settles, max|f(x)| < tol."""
    def stop(t, x):
        return "steady-state" if np.max(np.abs(f(t, x))) < tol else None
    return stop


def _rk4_step(f, t, x, h):
    s1 = f(t, x)
    s2 = f(t + 0.5 * h, x + 0.5 * h * s1)
    s3 = f(t + 0.5 * h, x + 0.5 * h * s2)
    s4 = f(t + h, x + h * s3)
    return x + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)


# Fehlberg 4(5) tableau
_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3554.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0)
_BERR = (1.0 / 360.0, 0.0, -128.0 / 4275.0, -2197.0 / 75240.0, 0.02, 2.0 / 55.0)


def _rkf45_step(f, t, x, h):
    k = [f(t, x)]
    for i in range(1, 6):
        xi = x + h * sum(a * ks for a, ks in zip(_A[i], k))
        k.append(f(t + _C[i] * h, xi))
    x4 = x + h * sum(b * ks for b, ks in zip(_B4, k))
    err = h * sum(b * ks for b, ks in zip(_BERR, k))
    return x4, err


def integrate(f, x0, t_span, cfg=None, t_eval=None, stop=None):
    """Integrate dx/dt = f(t, x) over t_span = (t0, t1).

    Parameters
    ----------
    f : callable (t, x) -> ndarray
    x0 : array-like initial state
    cfg : IntegratorConfig, optional (defaults: adaptive RKF45, rtol 1e-8)
    t_eval : array-like, optional
        Times at which the trace is sampled (steps land on them exactly).
        When omitted, every accepted step is recorded.
    stop : callable (t, x) -> falsy | str, optional
        Event-style termination; a truthy return ends the run and is
        reported as the event reason.

    Returns
    -------
    IntegrationResult

    Raises
    ------
    IntegrationError
        On step underflow (adaptive) or a non-finite state; the exception
        carries the last good time and state.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    x = np.array(x0, dtype=float)
    t = t0
    checkpoints = [t1] if t_eval is None else sorted(
        {float(te) for te in t_eval if t0 < te <= t1} | {t1})
    ts, xs = [t0], [x.copy()]
    reason = stop(t0, x) if stop is not None else None
    if reason:
        return IntegrationResult(t0, x, np.array(ts), np.array(xs),
                                 "event", str(reason), 0)

    adaptive = cfg.method == "rk45-adaptive"
    h = cfg.step
    n_steps = 0
    ci = 0
    record_all = t_eval is None
    while t < t1:
        target = checkpoints[ci]
        h_try = min(h, target - t)
        if adaptive:
            x_new, err = _rkf45_step(f, t, x, h_try)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(x), np.abs(x_new))
            err_norm = float(np.max(np.abs(err) / scale))
            if not np.isfinite(err_norm):
                raise IntegrationError("non-finite state during integration", t, x)
            if err_norm > 1.0:
                h = h_try * max(0.2, 0.9 * err_norm ** -0.2)
                if h < 1e-14 * max(1.0, abs(t)):
                    raise IntegrationError("step size underflow", t, x)
                continue
            grow = 5.0 if err_norm == 0.0 else min(5.0, 0.9 * err_norm ** -0.2)
            h = max(h_try * grow, h * 0.2) if h_try == h else h
        else:
            x_new = _rk4_step(f, t, x, h_try)
        if not np.all(np.isfinite(x_new)):
            raise IntegrationError("non-finite state during integration", t, x)
        t = t + h_try
        x = x_new
        n_steps += 1
        hit_checkpoint = abs(t - target) < 1e-12 * max(1.0, abs(target))
        if hit_checkpoint:
            t = target
            ci = min(ci + 1, len(checkpoints) - 1)
        if record_all or hit_checkpoint:
            ts.append(t)
            xs.append(x.copy())
        if stop is not None:
            reason = stop(t, x)
            if reason:
                if not (record_all or hit_checkpoint):
                    ts.append(t)
                    xs.append(x.copy())
                return IntegrationResult(t, x, np.array(ts), np.array(xs),
                                         "event", str(reason), n_steps)
        if n_steps >= cfg.max_steps:
            raise IntegrationError("max_steps exceeded", t, x)
    return IntegrationResult(t, x, np.array(ts), np.array(xs),
                             "finished", "", n_steps)
