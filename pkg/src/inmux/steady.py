"""Steady-state analysis: equilibrium solves, input-instance search, and
pseudo-arclength continuation of input branches.

The input-multiplicity question is answered by ``find_input_instances``:
with the outputs pinned to the setpoint (y = x), the two balances become a
2x2 root-finding problem in the inputs, attacked by damped Newton from a
deterministic multistart grid.  ``continue_branch`` follows the
steady-state locus as one output varies with the other held fixed,
parameterized by arclength so folds in the inputs are traversed.
"""

from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernels
from .model import InputPair, StatePair


class SolverError(RuntimeError):
    """A Newton solve failed to converge; no best-effort result is returned."""


@dataclass(frozen=True)
class Instance:
    """One steady-state input instance for a setpoint."""
    u: InputPair
    x: StatePair
    residual: float


@dataclass
class InputInstanceSet:
    """All input instances found for one setpoint, ordered by (u1, u2)."""
    setpoint: np.ndarray
    instances: list

    def __len__(self):
        return len(self.instances)

    def u_array(self):
        return np.array([inst.u.as_array() for inst in self.instances])


@dataclass(frozen=True)
class BranchPoint:
    u: InputPair
    y_free: float
    s: float
    stable: bool


@dataclass
class Branch:
    """A continuation branch with one output pinned."""
    fixed_index: int        # 0 -> y1 held fixed, 1 -> y2 held fixed
    fixed_value: float
    points: list = field(default_factory=list)
    stop_reason: str = ""

    def as_rows(self):
        """Rows (s, u1, u2, y1, y2, stable) for CSV export."""
        rows = []
        for pt in self.points:
            y = [0.0, 0.0]
            y[self.fixed_index] = self.fixed_value
            y[1 - self.fixed_index] = pt.y_free
            rows.append((pt.s, pt.u.u1, pt.u.u2, y[0], y[1], int(pt.stable)))
        return rows


def solve_x(params, u, x_guess, tol=1.0e-12, max_iter=50):
    """Solve rhs(x, u) = 0 for the state at fixed input by damped Newton.

    Backtracks on the residual norm; raises SolverError on non-convergence.
    """
    p = params.as_array()
    uv = np.asarray(getattr(u, "as_array", lambda: u)(), dtype=float)
    x = np.array(getattr(x_guess, "as_array", lambda: x_guess)(), dtype=float)
    f = kernels.rhs(p, x, uv)
    for _ in range(max_iter):
        if np.max(np.abs(f)) < tol:
            return x
        step = np.linalg.solve(kernels.jac_x(p, x, uv), -f)
        lam = 1.0
        norm0 = np.linalg.norm(f)
        while lam >= 1e-12:
            x_new = x + lam * step
            f_new = kernels.rhs(p, x_new, uv)
            if np.all(np.isfinite(f_new)) and np.linalg.norm(f_new) < (1.0 - 1e-4 * lam) * norm0:
                break
            lam *= 0.5
        else:
            raise SolverError(f"solve_x: line search stalled at u = {tuple(uv)}")
        x, f = x_new, f_new
    if np.max(np.abs(f)) < tol:
        return x
    raise SolverError(f"solve_x: no convergence in {max_iter} iterations at u = {tuple(uv)}")


def _newton_u(p, r, u0, tol, max_iter=50):
    """Damped Newton on rhs(r, u) = 0 with unknown inputs; None on failure."""
    u = np.array(u0, dtype=float)
    f = kernels.rhs(p, r, u)
    for _ in range(max_iter):
        if np.max(np.abs(f)) < tol:
            return u
        try:
            step = np.linalg.solve(kernels.jac_u(p, r, u), -f)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        norm0 = np.linalg.norm(f)
        while lam >= 1e-12:
            u_new = u + lam * step
            if u_new[0] > 0.0 and 0.0 < u_new[1] < 1.0:
                f_new = kernels.rhs(p, r, u_new)
                if np.all(np.isfinite(f_new)) and np.linalg.norm(f_new) < (1.0 - 1e-4 * lam) * norm0:
                    break
            lam *= 0.5
        else:
            return None
        u, f = u_new, f_new
    return u if np.max(np.abs(f)) < tol else None


def find_input_instances(params, r, u1_range=(0.85, 1.15), u2_range=(0.2, 0.8),
                         grid=(20, 20), merge_radius=1.0e-4, tol=1.0e-12):
    """All steady-state input instances for setpoint r inside a search box.

    Multistart damped Newton on rhs(r, u) = 0 over a grid of seeds; converged
    roots are kept when they land inside the box, deduplicated with the merge
    radius (max-norm), and ordered by (u1, u2).  An empty set is a valid
    outcome, not an error.
    """
    p = params.as_array()
    rv = np.asarray(getattr(r, "as_array", lambda: r)(), dtype=float)
    seeds1 = np.linspace(u1_range[0], u1_range[1], grid[0])
    seeds2 = np.linspace(u2_range[0], u2_range[1], grid[1])
    roots = []
    for a in seeds1:
        for b in seeds2:
            u = _newton_u(p, rv, (a, b), tol)
            if u is None:
                continue
            if not (u1_range[0] <= u[0] <= u1_range[1]
                    and u2_range[0] <= u[1] <= u2_range[1]):
                continue
            if any(np.max(np.abs(u - q)) < merge_radius for q in roots):
                continue
            roots.append(u)
    roots.sort(key=lambda q: (q[0], q[1]))
    instances = [
        Instance(u=InputPair(*q), x=StatePair(*rv),
                 residual=float(np.max(np.abs(kernels.rhs(p, rv, q)))))
        for q in roots
    ]
    return InputInstanceSet(setpoint=rv, instances=instances)


def _branch_residual(p, z, fixed_index, fixed_value):
    x = np.empty(2)
    x[fixed_index] = fixed_value
    x[1 - fixed_index] = z[2]
    u = z[:2]
    return kernels.rhs(p, x, u), x, u


def _branch_jacobian(p, z, fixed_index, fixed_value):
    f, x, u = _branch_residual(p, z, fixed_index, fixed_value)
    J = np.empty((2, 3))
    J[:, :2] = kernels.jac_u(p, x, u)
    J[:, 2] = kernels.jac_x(p, x, u)[:, 1 - fixed_index]
    return f, J


def _corrector(p, z_pred, tangent, fixed_index, fixed_value, tol=1.0e-10,
               max_iter=12):
    """Newton on the steady-state equations plus the normal-plane condition."""
    z = np.array(z_pred)
    for it in range(max_iter):
        f, J = _branch_jacobian(p, z, fixed_index, fixed_value)
        res = np.array([f[0], f[1], tangent @ (z - z_pred)])
        if np.max(np.abs(res)) < tol:
            return z, it
        A = np.vstack([J, tangent])
        try:
            dz = np.linalg.solve(A, -res)
        except np.linalg.LinAlgError:
            return None, it
        z = z + dz
        if not (z[0] > 0.0 and 0.0 < z[1] < 1.0):
            return None, it
    f, _ = _branch_jacobian(p, z, fixed_index, fixed_value)
    if np.max(np.abs(f)) < tol:
        return z, max_iter
    return None, max_iter


def _is_stable(p, x, u):
    eig = np.linalg.eigvals(kernels.jac_x(p, x, u))
    return bool(np.all(eig.real < 0.0))


def continue_branch(params, fixed_output, y_free_start, u_start, direction=1,
                    ds0=1.0e-2, ds_min=1.0e-4, ds_max=5.0e-2, max_points=2000,
                    s_max=20.0, domain=((0.05, 5.0), (0.005, 0.995), (0.001, 0.999)),
                    tol=1.0e-10):
    """Pseudo-arclength continuation of the steady-state locus.

    Parameters
    ----------
    fixed_output : (index, value)
        Which output is pinned (0 or 1) and at what value.
    y_free_start, u_start : starting point, a steady state within tolerance.
    direction : +1 / -1, initial traversal orientation.
    domain : ((u1_lo, u1_hi), (u2_lo, u2_hi), (yf_lo, yf_hi))
        Leaving this box ends the branch ("domain-boundary").

    Returns a Branch; stop_reason is one of "domain-boundary", "max-points",
    "arclength-limit", or "corrector-failed".
    """
    p = params.as_array()
    fixed_index, fixed_value = int(fixed_output[0]), float(fixed_output[1])
    uv = np.asarray(getattr(u_start, "as_array", lambda: u_start)(), dtype=float)
    z = np.array([uv[0], uv[1], float(y_free_start)])

    f, J = _branch_jacobian(p, z, fixed_index, fixed_value)
    if np.max(np.abs(f)) > 1e2 * tol:
        # polish the seed with the free output pinned
        zp, _ = _corrector(p, z, np.array([0.0, 0.0, 1.0]), fixed_index,
                           fixed_value, tol=tol)
        if zp is None:
            raise SolverError("continue_branch: starting point is not a steady state")
        z = zp
        f, J = _branch_jacobian(p, z, fixed_index, fixed_value)

    # initial tangent = null vector of the 2x3 Jacobian, oriented along y_free
    _, _, vt = np.linalg.svd(J)
    tangent = vt[-1]
    if tangent[2] != 0.0:
        tangent = tangent * np.sign(tangent[2])
    tangent = tangent * direction

    branch = Branch(fixed_index=fixed_index, fixed_value=fixed_value)
    def add_point(zc, s):
        x = np.empty(2)
        x[fixed_index] = fixed_value
        x[1 - fixed_index] = zc[2]
        branch.points.append(BranchPoint(
            u=InputPair(zc[0], zc[1]), y_free=float(zc[2]), s=float(s),
            stable=_is_stable(p, x, zc[:2])))

    s = 0.0
    add_point(z, s)
    ds = ds0
    z_prev = None
    while True:
        if len(branch.points) >= max_points:
            branch.stop_reason = "max-points"
            break
        if s >= s_max:
            branch.stop_reason = "arclength-limit"
            break
        if z_prev is not None:
            secant = z - z_prev
            norm = np.linalg.norm(secant)
            if norm > 0:
                tangent = secant / norm
        z_new = None
        while ds >= ds_min:
            z_pred = z + ds * tangent
            z_new, iters = _corrector(p, z_pred, tangent, fixed_index,
                                      fixed_value, tol=tol)
            if z_new is not None:
                break
            ds *= 0.5
        if z_new is None:
            branch.stop_reason = "corrector-failed"
            break
        z_prev, z = z, z_new
        s += np.linalg.norm(z - z_prev)
        add_point(z, s)
        (u1b, u2b, yfb) = domain
        if not (u1b[0] <= z[0] <= u1b[1] and u2b[0] <= z[1] <= u2b[1]
                and yfb[0] <= z[2] <= yfb[1]):
            branch.stop_reason = "domain-boundary"
            break
        if iters <= 3:
            ds = min(ds * 1.4, ds_max)
        elif iters > 8:
            ds = max(ds * 0.5, ds_min)
    return branch


def branch_crossings(branch, y_free_value):
    """Input pairs where the branch crosses a free-output level.

    Linear interpolation between bracketing branch points; used to read off
    which input instances a continuation run visits at the setpoint.
    """
    pts = branch.points
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        da = a.y_free - y_free_value
        db = b.y_free - y_free_value
        if da == 0.0:
            out.append(a.u.as_array())
        elif da * db < 0.0:
            w = da / (da - db)
            ua, ub = a.u.as_array(), b.u.as_array()
            out.append(ua + w * (ub - ua))
    if pts and pts[-1].y_free == y_free_value:
        out.append(pts[-1].u.as_array())
    return out
