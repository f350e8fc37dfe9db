"""CSTR model: rate laws, input scalings, balances, analytic Jacobians.

Two sequential reversible reactions A <-> B <-> C run in a continuous
stirred tank; the states are the mole fractions (x1, x2) of A and B
(x3 = 1 - x1 - x2 is redundant), the manipulated inputs are the scaled
temperature u1 = T/T0 and scaled residence time u2 = tau/(tau0 + tau),
and the controlled outputs are y = x.

Note on the default constants: the forward/backward rate pairs are
(k1, k4) for A<->B and (k2, k3) for B<->C, so the B balance loses the
k4*x2 that the A balance gains.  k40 defaults to 0.006 1/s; with these
values the setpoint (0.49, 0.37) has exactly three steady-state input
instances near (0.914, 0.580), (1.043, 0.333), (1.075, 0.675).
"""

import warnings
from dataclasses import dataclass, fields

import numpy as np

from ._kernels import kernels


class DomainError(ValueError):
    """Raised when an input leaves the physical domain (u1 <= 0 or u2 outside (0, 1))."""


@dataclass(frozen=True)
class PlantParams:
    """Plant constants: rate pre-exponentials (1/s), activation temperatures
    E_i/R (K), reference temperature (K), reference residence time (s), and
    feed mole fractions."""

    k10: float = 1.0
    k20: float = 0.7
    k30: float = 0.1
    k40: float = 0.006
    e1r: float = 5000.0
    e2r: float = 6000.0
    e3r: float = 30000.0
    e4r: float = 50000.0
    t0: float = 600.0
    tau0: float = 1.0
    x10: float = 0.8
    x20: float = 0.2

    def __post_init__(self):
        for name in ("k10", "k20", "k30", "k40", "e1r", "e2r", "e3r", "e4r",
                     "t0", "tau0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 <= self.x10 and 0.0 <= self.x20
                and self.x10 + self.x20 <= 1.0):
            raise ValueError("feed fractions must satisfy 0 <= x10, x20, x10+x20 <= 1")

    def as_array(self):
        """Packed parameter vector consumed by the numeric kernels."""
        return np.array([self.k10, self.k20, self.k30, self.k40,
                         self.e1r, self.e2r, self.e3r, self.e4r,
                         self.t0, self.tau0, self.x10, self.x20])

    @classmethod
    def from_dict(cls, overrides):
        """Build from a mapping of field overrides; unknown keys rejected."""
        known = {f.name for f in fields(cls)}
        bad = set(overrides) - known
        if bad:
            raise ValueError(f"unknown plant parameter(s): {sorted(bad)}")
        return cls(**{k: float(v) for k, v in overrides.items()})


@dataclass(frozen=True)
class StatePair:
    """Mole fractions (x1, x2).  Transient Newton/integrator iterates may
    leave the composition simplex, so violations only warn."""

    x1: float
    x2: float

    def __post_init__(self):
        if not (np.isfinite(self.x1) and np.isfinite(self.x2)):
            raise ValueError("state must be finite")
        if self.x1 < 0 or self.x2 < 0 or self.x1 + self.x2 > 1:
            warnings.warn(
                f"state ({self.x1:.6g}, {self.x2:.6g}) outside the composition simplex",
                stacklevel=2)

    def as_array(self):
        return np.array([self.x1, self.x2])


@dataclass(frozen=True)
class InputPair:
    """Scaled inputs (u1, u2) = (T/T0, tau/(tau0+tau)); u2 = 1 is the
    infinite-residence-time singularity."""

    u1: float
    u2: float

    def __post_init__(self):
        if not self.u1 > 0.0:
            raise DomainError(f"u1 = {self.u1!r} must be positive")
        if not 0.0 < self.u2 < 1.0:
            raise DomainError(f"u2 = {self.u2!r} must lie in (0, 1)")

    def as_array(self):
        return np.array([self.u1, self.u2])


def _vec(v, n=2):
    a = np.asarray(getattr(v, "as_array", lambda: v)(), dtype=float).reshape(n)
    return np.ascontiguousarray(a)


def _check_u(u):
    if not u[0] > 0.0:
        raise DomainError(f"u1 = {u[0]!r} must be positive")
    if not 0.0 < u[1] < 1.0:
        raise DomainError(f"u2 = {u[1]!r} must lie in (0, 1)")


def rate_constants(params, u1):
    """Arrhenius rate constants at scaled temperature u1.

    k_i = k_i0 * exp(-(E_i/R/T0) * (1/u1 - 1)); at u1 = 1 this returns the
    four pre-exponential constants.

    Returns
    -------
    ndarray, shape (4,) : (k1, k2, k3, k4) in 1/s.
    """
    if not u1 > 0.0:
        raise DomainError(f"u1 = {u1!r} must be positive")
    return kernels.rate_constants(params.as_array(), float(u1))


def tau_from_u2(params, u2):
    """Residence time tau (s) from the scaled residence time u2 = tau/(tau0+tau)."""
    if not 0.0 < u2 < 1.0:
        raise DomainError(f"u2 = {u2!r} must lie in (0, 1)")
    return params.tau0 * u2 / (1.0 - u2)


def rhs(params, x, u):
    """Time derivative (dx1/dt, dx2/dt) of the species balances, 1/s."""
    u = _vec(u)
    _check_u(u)
    return kernels.rhs(params.as_array(), _vec(x), u)


def jac_x(params, x, u):
    """Analytic state Jacobian d(rhs)/dx (2x2, 1/s)."""
    u = _vec(u)
    _check_u(u)
    return kernels.jac_x(params.as_array(), _vec(x), u)


def jac_u(params, x, u):
    """Analytic input Jacobian d(rhs)/du (2x2, 1/s)."""
    u = _vec(u)
    _check_u(u)
    return kernels.jac_u(params.as_array(), _vec(x), u)
