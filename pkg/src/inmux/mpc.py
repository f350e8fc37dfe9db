"""Receding-horizon control of the plant with a quasi-Newton inner solver.

Each controller step minimizes a finite-horizon objective over the stacked
input sequence (H stages, two inputs each): quadratic output tracking plus
quadratic move suppression, with the move chain anchored at the previously
applied input (which is what makes converged operation offset-free).  The
optimizer is BFGS with Armijo backtracking, warm-started at the previous
input repeated over the horizon and restarted with an identity inverse
Hessian every step.  Prediction uses fixed-step RK4 under a zero-order hold,
so closed-loop trajectories are exactly reproducible.

The heavy lifting (prediction, objective, analytic gradient by tangent
propagation, the BFGS loop, and the closed-loop simulation) lives in the
selected numeric backend; this module owns configuration and classification.
"""

from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernels

STATUS_LABELS = {0: "converged", 1: "max-iterations", 2: "line-search-failed"}

TRAJ_COLUMNS = ("t", "x1", "x2", "u1", "u2", "cost", "grad_norm", "optimizer_status")


def _weight(w):
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        w = float(w) * np.eye(2)
    elif w.shape == (2,):
        w = np.diag(w)
    if w.shape != (2, 2):
        raise ValueError("weights must be scalar, length-2, or 2x2")
    if not np.allclose(w, w.T, atol=1e-12):
        raise ValueError("weight matrix must be symmetric")
    if np.any(np.linalg.eigvalsh(w) < -1e-12):
        raise ValueError("weight matrix must be positive semidefinite")
    return w


@dataclass
class MpcConfig:
    """Tuning for the receding-horizon controller.

    u_box is the feasible input region used by the prediction barrier:
    stages outside it are clamped for simulation and penalized
    quadratically (weight 1e6), keeping the unconstrained optimizer
    interior without hard constraints.
    """
    horizon: int = 2
    dt: float = 0.5
    ky: np.ndarray = field(default_factory=lambda: np.eye(2))
    ku: np.ndarray = field(default_factory=lambda: 2.0 * np.eye(2))
    gtol: float = 1.0e-8
    max_iter: int = 200
    substeps: int = 10
    u_box: tuple = (0.01, 100.0, 1.0e-3, 1.0 - 1.0e-3)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.dt <= 0 or self.gtol <= 0 or self.substeps < 1 or self.max_iter < 1:
            raise ValueError("dt, gtol, substeps, max_iter must be positive")
        self.ky = _weight(self.ky)
        self.ku = _weight(self.ku)


@dataclass
class MpcState:
    """Controller state between samples: plant output and last applied input."""
    x: np.ndarray
    u_prev: np.ndarray
    step: int = 0


@dataclass
class StepDiagnostics:
    cost: float
    grad_norm: float
    status: int
    n_iter: int

    @property
    def warning(self):
        return self.status != kernels.STATUS_CONVERGED

    @property
    def status_label(self):
        return STATUS_LABELS.get(self.status, str(self.status))


@dataclass
class MpcRun:
    """Closed-loop simulation result; trajectory columns are TRAJ_COLUMNS."""
    trajectory: np.ndarray
    label: int               # 1-based attractor index, 0 unresolved
    steps: int
    classification: str
    n_warnings: int


def _as2(v):
    return np.ascontiguousarray(
        np.asarray(getattr(v, "as_array", lambda: v)(), dtype=float).reshape(2))


def predict(params, x, u_seq, cfg):
    """Outputs at the H sample instants under a zero-order-hold sequence."""
    return kernels.predict_hold(params.as_array(), _as2(x),
                                np.asarray(u_seq, dtype=float),
                                cfg.dt, cfg.substeps)


def mpc_objective(params, cfg, state, u_seq, setpoint):
    """Finite-horizon cost of a candidate input sequence (length H)."""
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.size != 2 * cfg.horizon:
        raise ValueError(f"expected {cfg.horizon} input stages")
    return kernels.mpc_cost(params.as_array(), _as2(state.x), _as2(state.u_prev),
                            u_seq, _as2(setpoint), cfg.ky, cfg.ku,
                            cfg.dt, cfg.substeps, cfg.u_box)


def mpc_gradient(params, cfg, state, u_seq, setpoint):
    """Cost and its analytic gradient w.r.t. the flat input sequence."""
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.size != 2 * cfg.horizon:
        raise ValueError(f"expected {cfg.horizon} input stages")
    return kernels.mpc_cost_grad(params.as_array(), _as2(state.x),
                                 _as2(state.u_prev), u_seq, _as2(setpoint),
                                 cfg.ky, cfg.ku, cfg.dt, cfg.substeps, cfg.u_box)


def solve_mpc_step(params, cfg, state, setpoint):
    """One controller solve; returns (applied input, StepDiagnostics)."""
    u_next, cost, gnorm, status, n_iter = kernels.mpc_step(
        params.as_array(), _as2(state.x), _as2(state.u_prev), _as2(setpoint),
        cfg.ky, cfg.ku, cfg.horizon, cfg.dt, cfg.substeps, cfg.u_box,
        cfg.gtol, cfg.max_iter)
    return u_next, StepDiagnostics(cost=cost, grad_norm=gnorm, status=status,
                                   n_iter=n_iter)


def simulate_mpc(params, cfg, x0, u0, setpoint, targets, max_steps=2000,
                 y_tol=1.0e-4, u_tol=1.0e-3, hold_steps=20):
    """Run the closed loop until classified or max_steps.

    A run is classified "converged-instance-i" once the output stays within
    y_tol of the setpoint and the applied input within u_tol of target i for
    hold_steps consecutive samples.  Optimizer warnings never abort the run;
    they are counted and the per-step status is in the trajectory.
    """
    traj, label, steps = kernels.mpc_sim(
        params.as_array(), _as2(x0), _as2(u0), _as2(setpoint),
        cfg.ky, cfg.ku, cfg.horizon, cfg.dt, cfg.substeps, cfg.u_box,
        cfg.gtol, cfg.max_iter, int(max_steps),
        np.asarray(targets, dtype=float), y_tol, u_tol, int(hold_steps))
    status_col = traj[1:, 7]
    classification = f"converged-instance-{label}" if label > 0 else "unresolved"
    return MpcRun(trajectory=np.asarray(traj), label=int(label),
                  steps=int(steps), classification=classification,
                  n_warnings=int(np.count_nonzero(status_col)))
