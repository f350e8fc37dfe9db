"""Pure Python fallback for the compiled numeric core.

Implements the same entry points as the Cython extension ``inmux._core``
(plant right-hand side, analytic Jacobians, zero-order-hold RK4 propagation,
the receding-horizon cost with its tangent-propagated gradient, one BFGS
controller solve, and the full closed-loop simulation loop) so the package
works without a C toolchain.  Selection happens in :mod:`inmux._kernels`.

Everything here operates on a packed parameter vector

    p = [k10, k20, k30, k40, e1r, e2r, e3r, e4r, t0, tau0, x10, x20]

with activation temperatures ``e*r`` in Kelvin (E_i/R) and all rate constants
in 1/s.  State is (x1, x2), input is (u1, u2) = (T/T0, tau/(tau0+tau)).
"""

import math

import numpy as np

# Quadratic penalty weight for input-box violations during MPC prediction.
BARRIER_WEIGHT = 1.0e6

# Optimizer status codes shared by both backends.
STATUS_CONVERGED = 0
STATUS_MAXITER = 1
STATUS_LINESEARCH = 2


def rate_constants(p, u1):
    """Arrhenius rate constants at scaled temperature u1 = T/T0."""
    w = 1.0 / u1 - 1.0
    return np.array([
        p[0] * math.exp(-(p[4] / p[8]) * w),
        p[1] * math.exp(-(p[5] / p[8]) * w),
        p[2] * math.exp(-(p[6] / p[8]) * w),
        p[3] * math.exp(-(p[7] / p[8]) * w),
    ])


def rhs(p, x, u):
    """Species balances for the two non-redundant mole fractions."""
    k1, k2, k3, k4 = rate_constants(p, u[0])
    invtau = (1.0 - u[1]) / (p[9] * u[1])
    f1 = -k1 * x[0] + k4 * x[1] + (p[10] - x[0]) * invtau
    f2 = (k1 * x[0] - (k2 + k4) * x[1] + k3 * (1.0 - x[0] - x[1])
          + (p[11] - x[1]) * invtau)
    return np.array([f1, f2])


def jac_x(p, x, u):
    """Analytic state Jacobian d(rhs)/dx, 2x2."""
    k1, k2, k3, k4 = rate_constants(p, u[0])
    invtau = (1.0 - u[1]) / (p[9] * u[1])
    return np.array([
        [-k1 - invtau, k4],
        [k1 - k3, -(k2 + k4) - k3 - invtau],
    ])


def jac_u(p, x, u):
    """Analytic input Jacobian d(rhs)/du, 2x2."""
    k = rate_constants(p, u[0])
    scale = 1.0 / (p[8] * u[0] * u[0])
    dk1 = k[0] * p[4] * scale
    dk2 = k[1] * p[5] * scale
    dk3 = k[2] * p[6] * scale
    dk4 = k[3] * p[7] * scale
    dinv = -1.0 / (p[9] * u[1] * u[1])
    return np.array([
        [-dk1 * x[0] + dk4 * x[1], (p[10] - x[0]) * dinv],
        [dk1 * x[0] - (dk2 + dk4) * x[1] + dk3 * (1.0 - x[0] - x[1]),
         (p[11] - x[1]) * dinv],
    ])


def _hold_coeffs(p, u):
    """Affine form of the balances for a held input.

    For fixed u the model is linear in x: rhs(x) = A @ x + b.  The input
    Jacobian is affine in x as well; its x-coefficients and offsets are
    returned so RK4 stages need no further Arrhenius evaluations.
    """
    k1, k2, k3, k4 = rate_constants(p, u[0])
    invtau = (1.0 - u[1]) / (p[9] * u[1])
    A = np.array([[-k1 - invtau, k4],
                  [k1 - k3, -(k2 + k4) - k3 - invtau]])
    b = np.array([p[10] * invtau, k3 + p[11] * invtau])
    scale = 1.0 / (p[8] * u[0] * u[0])
    dk1 = k1 * p[4] * scale
    dk2 = k2 * p[5] * scale
    dk3 = k3 * p[6] * scale
    dk4 = k4 * p[7] * scale
    dinv = -1.0 / (p[9] * u[1] * u[1])
    # jac_u(x) = ju_lin @ x (per column) + ju_off
    ju_lin = np.array([[[-dk1, dk4], [-dinv, 0.0]],
                       [[dk1 - dk3, -(dk2 + dk4) - dk3], [0.0, -dinv]]])
    ju_off = np.array([[0.0, p[10] * dinv],
                       [dk3, p[11] * dinv]])
    return A, b, ju_lin, ju_off


def _ju_at(ju_lin, ju_off, x):
    return np.array([
        [ju_lin[0, 0] @ x + ju_off[0, 0], ju_lin[0, 1] @ x + ju_off[0, 1]],
        [ju_lin[1, 0] @ x + ju_off[1, 0], ju_lin[1, 1] @ x + ju_off[1, 1]],
    ])


def rk4_hold(p, x, u, dt, nsub):
    """Integrate the plant over dt with u held constant (classic RK4)."""
    A, b, _, _ = _hold_coeffs(p, u)
    h = dt / nsub
    y = np.array(x, dtype=float)
    for _ in range(nsub):
        s1 = A @ y + b
        s2 = A @ (y + 0.5 * h * s1) + b
        s3 = A @ (y + 0.5 * h * s2) + b
        s4 = A @ (y + h * s3) + b
        y = y + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
    return y


def _rk4_hold_tangent(p, x, u, dt, nsub):
    """RK4 propagation plus tangents M = dX'/dX and P = dX'/du."""
    A, b, ju_lin, ju_off = _hold_coeffs(p, u)
    h = dt / nsub
    y = np.array(x, dtype=float)
    MP = np.hstack([np.eye(2), np.zeros((2, 2))])
    zpad = np.zeros((2, 2))
    for _ in range(nsub):
        s1 = A @ y + b
        d1 = A @ MP + np.hstack([zpad, _ju_at(ju_lin, ju_off, y)])
        y2 = y + 0.5 * h * s1
        s2 = A @ y2 + b
        d2 = A @ (MP + 0.5 * h * d1) + np.hstack([zpad, _ju_at(ju_lin, ju_off, y2)])
        y3 = y + 0.5 * h * s2
        s3 = A @ y3 + b
        d3 = A @ (MP + 0.5 * h * d2) + np.hstack([zpad, _ju_at(ju_lin, ju_off, y3)])
        y4 = y + h * s3
        s4 = A @ y4 + b
        d4 = A @ (MP + h * d3) + np.hstack([zpad, _ju_at(ju_lin, ju_off, y4)])
        y = y + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
        MP = MP + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
    return y, MP[:, :2].copy(), MP[:, 2:].copy()


def _clamp_stage(u, ubox):
    """Clamp one input pair into the feasible box; return (clamped, violation)."""
    v = np.zeros(2)
    c = np.array(u, dtype=float)
    for j, (lo, hi) in enumerate(((ubox[0], ubox[1]), (ubox[2], ubox[3]))):
        if c[j] < lo:
            v[j] = c[j] - lo
            c[j] = lo
        elif c[j] > hi:
            v[j] = c[j] - hi
            c[j] = hi
    return c, v


def predict_hold(p, x, useq, dt, nsub):
    """Sampled predictions under a zero-order-hold input sequence.

    Parameters
    ----------
    useq : array, shape (H, 2) or flat (2H,)
        Inputs held over each of the H sampling intervals.

    Returns
    -------
    array, shape (H, 2) : plant state (= output) at the H sample instants.
    """
    us = np.asarray(useq, dtype=float).reshape(-1, 2)
    out = np.empty_like(us)
    y = np.array(x, dtype=float)
    for j, uj in enumerate(us):
        y = rk4_hold(p, y, uj, dt, nsub)
        out[j] = y
    return out


def mpc_cost(p, x, u_prev, useq, rset, ky, ku, dt, nsub, ubox):
    """Receding-horizon objective: output tracking plus move suppression.

    Stages outside the input box are clamped for prediction and charged
    BARRIER_WEIGHT * violation**2 per component, keeping iterates interior.
    """
    us = np.asarray(useq, dtype=float).reshape(-1, 2)
    cost = 0.0
    y = np.array(x, dtype=float)
    up = np.array(u_prev, dtype=float)
    for uj in us:
        ucl, v = _clamp_stage(uj, ubox)
        y = rk4_hold(p, y, ucl, dt, nsub)
        e = y - rset
        du = uj - up
        cost += e @ ky @ e + du @ ku @ du
        cost += BARRIER_WEIGHT * (v[0] * v[0] + v[1] * v[1])
        up = uj
    return float(cost)


def mpc_cost_grad(p, x, u_prev, useq, rset, ky, ku, dt, nsub, ubox):
    """Objective value and its analytic gradient w.r.t. the flat sequence.

    The tracking part is exact for the discrete RK4 prediction map (tangent
    propagation through every stage), so BFGS can be driven to tight
    gradient tolerances independent of the integration step.
    """
    us = np.asarray(useq, dtype=float).reshape(-1, 2)
    H = us.shape[0]
    cost = 0.0
    y = np.array(x, dtype=float)
    up = np.array(u_prev, dtype=float)
    Ms = np.empty((H, 2, 2))
    Ps = np.empty((H, 2, 2))
    tr = np.empty((H, 2))
    masks = np.empty((H, 2))
    grad = np.zeros(2 * H)
    for j, uj in enumerate(us):
        ucl, v = _clamp_stage(uj, ubox)
        masks[j] = (v == 0.0).astype(float)
        y, M, P = _rk4_hold_tangent(p, y, ucl, dt, nsub)
        Ms[j], Ps[j] = M, P
        e = y - rset
        tr[j] = e
        du = uj - up
        cost += e @ ky @ e + du @ ku @ du
        cost += BARRIER_WEIGHT * (v[0] * v[0] + v[1] * v[1])
        grad[2 * j:2 * j + 2] += 2.0 * (ku @ du) + 2.0 * BARRIER_WEIGHT * v
        if j > 0:
            grad[2 * j - 2:2 * j] -= 2.0 * (ku @ du)
        up = uj
    # Backward accumulation of tracking sensitivities:
    # v_j = 2*Ky*e_j + M_{j+1}^T v_{j+1};  dF/du_j += P_j^T v_j (inside box).
    vacc = np.zeros(2)
    for j in range(H - 1, -1, -1):
        vacc = 2.0 * (ky @ tr[j]) + (Ms[j + 1].T @ vacc if j + 1 < H else 0.0)
        grad[2 * j:2 * j + 2] += masks[j] * (Ps[j].T @ vacc)
    return float(cost), grad


def mpc_step(p, x, u_prev, rset, ky, ku, H, dt, nsub, ubox, gtol, max_iter):
    """One controller solve: BFGS with Armijo backtracking, warm-started
    at the previous input repeated over the horizon.

    Returns (u_next, cost, grad_norm, status, n_iter).
    """
    z = np.tile(np.asarray(u_prev, dtype=float), H)
    f, g = mpc_cost_grad(p, x, u_prev, z, rset, ky, ku, dt, nsub, ubox)
    n = 2 * H
    Hinv = np.eye(n)
    status = STATUS_MAXITER
    it = 0
    while it < max_iter:
        gnorm = np.max(np.abs(g))
        if gnorm < gtol:
            status = STATUS_CONVERGED
            break
        d = -(Hinv @ g)
        slope = g @ d
        if slope >= 0.0:   # stale curvature; restart on steepest descent
            Hinv = np.eye(n)
            d = -g
            slope = g @ d
        alpha = 1.0
        fnew = None
        for _ in range(40):
            znew = z + alpha * d
            fnew = mpc_cost(p, x, u_prev, znew, rset, ky, ku, dt, nsub, ubox)
            if math.isfinite(fnew) and fnew <= f + 1.0e-4 * alpha * slope:
                break
            alpha *= 0.5
            fnew = None
        if fnew is None:
            status = STATUS_LINESEARCH
            break
        znew = z + alpha * d
        fnew, gnew = mpc_cost_grad(p, x, u_prev, znew, rset, ky, ku, dt, nsub, ubox)
        s = znew - z
        yv = gnew - g
        sy = s @ yv
        if sy > 1.0e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            rho = 1.0 / sy
            A = np.eye(n) - rho * np.outer(s, yv)
            Hinv = A @ Hinv @ A.T + rho * np.outer(s, s)
        z, f, g = znew, fnew, gnew
        it += 1
    u_next, _ = _clamp_stage(z[:2], ubox)
    return u_next, f, float(np.max(np.abs(g))), status, it


def mpc_sim(p, x0, u0, rset, ky, ku, H, dt, nsub, ubox, gtol, max_iter,
            max_steps, targets, y_tol, u_tol, hold_steps):
    """Closed-loop receding-horizon simulation until classification.

    Converges to target i (1-based label) once the output is within y_tol
    of the setpoint and the applied input within u_tol of target i for
    hold_steps consecutive steps; label 0 means unresolved at max_steps.

    Returns (trajectory, label, steps) where trajectory rows are
    (t, x1, x2, u1, u2, cost, grad_norm, status).
    """
    tg = np.asarray(targets, dtype=float).reshape(-1, 2)
    traj = np.empty((max_steps + 1, 8))
    x = np.array(x0, dtype=float)
    u = np.array(u0, dtype=float)
    traj[0] = (0.0, x[0], x[1], u[0], u[1], np.nan, np.nan, 0)
    label = 0
    streak = 0
    streak_i = -1
    steps = 0
    for kstep in range(1, max_steps + 1):
        u, cost, gnorm, status, _ = mpc_step(
            p, x, u, rset, ky, ku, H, dt, nsub, ubox, gtol, max_iter)
        x = rk4_hold(p, x, u, dt, nsub)
        traj[kstep] = (kstep * dt, x[0], x[1], u[0], u[1], cost, gnorm, status)
        steps = kstep
        if np.max(np.abs(x - rset)) < y_tol:
            hit = -1
            for i in range(tg.shape[0]):
                if np.max(np.abs(u - tg[i])) < u_tol:
                    hit = i
                    break
            if hit >= 0 and hit == streak_i:
                streak += 1
            else:
                streak = 1 if hit >= 0 else 0
                streak_i = hit
            if hit >= 0 and streak >= hold_steps:
                label = hit + 1
                break
        else:
            streak = 0
            streak_i = -1
    return traj[:steps + 1], label, steps
