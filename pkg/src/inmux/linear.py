"""Steady-state gain matrix, RGA, and integral-controllability analysis.

Controller convention used throughout (worked example to pin the layout):
the loop error is e = r - y and the integrator bank is du/dt = k * C @ e,
with C indexed [input, output].  For the direct pairing (y1-u1), (y2-u2)
with signs (s1, s2) and magnitudes (m1, m2),

    C = [[s1*m1, 0    ],
         [0,     s2*m2]]

and for the swapped pairing (y1-u2), (y2-u1) the y1 error drives u2:

    C = [[0,     s2*m2],
         [s1*m1, 0    ]]

Signs and magnitudes are always ordered by the *controlled* output.  The
static loop matrix analyzed is H = G @ C; for a 2x2 system both of its
eigenvalues lie in the open right half plane iff det(H) > 0 and tr(H) > 0,
which reduces the question "do positive magnitudes exist that make this
pairing/sign choice integral-controllable" to sign conditions on the
paired gains (see feasible_sign_sets).
"""

from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernels

SIGN_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_EIG_TOL = 1.0e-9   # indeterminate band around the imaginary axis

IC_YES = "integral-controllable"
IC_NO = "not-integral-controllable"
IC_BOUNDARY = "indeterminate"


@dataclass(frozen=True)
class PairingConfig:
    """Loop pairing, per-loop gain signs, and gain magnitudes."""
    pairing: str = "direct"            # "direct" | "swapped"
    signs: tuple = (1, 1)              # ordered by controlled output
    magnitudes: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.pairing not in ("direct", "swapped"):
            raise ValueError(f"unknown pairing {self.pairing!r}")
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be +1 or -1")
        if any(m <= 0 for m in self.magnitudes):
            raise ValueError("magnitudes must be strictly positive")


@dataclass
class GainAnalysis:
    """Local steady-state analysis at one equilibrium."""
    u: np.ndarray
    gain: np.ndarray        # dy_ss/du, 2x2
    rga: np.ndarray
    jac_eigs: np.ndarray    # open-loop state-Jacobian eigenvalues
    singular: bool = False


@dataclass
class ICVerdict:
    """Integral-controllability classification of one (G, controller) pair."""
    classification: str                 # IC_YES / IC_NO / IC_BOUNDARY
    eigenvalues: np.ndarray             # of H = G @ C at the given magnitudes
    exists_magnitudes: bool             # over all positive magnitudes
    witness: tuple = None               # magnitudes maximizing min Re eig(H)


@dataclass
class UniquenessReport:
    pairing: str
    signs: tuple
    stable_instances: list = field(default_factory=list)  # 0-based indices
    singleton: bool = False


def controller_matrix(cfg):
    """Static compensator C (input x output) for a PairingConfig; see module
    docstring for the sign/magnitude layout."""
    s1, s2 = cfg.signs
    m1, m2 = cfg.magnitudes
    if cfg.pairing == "direct":
        return np.array([[s1 * m1, 0.0], [0.0, s2 * m2]])
    return np.array([[0.0, s2 * m2], [s1 * m1, 0.0]])


def gain_matrix(params, x_ss, u):
    """Steady-state gain dy_ss/du by implicit differentiation of rhs = 0.

    G = -(d f/d x)^-1 (d f/d u) with y = x; requires a nonsingular state
    Jacobian, which holds at every open-loop-stable equilibrium.
    """
    p = params.as_array()
    xv = np.asarray(getattr(x_ss, "as_array", lambda: x_ss)(), dtype=float)
    uv = np.asarray(getattr(u, "as_array", lambda: u)(), dtype=float)
    J = kernels.jac_x(p, xv, uv)
    if abs(np.linalg.det(J)) < 1e-14:
        raise np.linalg.LinAlgError("singular state Jacobian at the equilibrium")
    return -np.linalg.solve(J, kernels.jac_u(p, xv, uv))


def rga(G):
    """Relative gain array G * (G^-1)^T (elementwise); rows/columns sum to 1."""
    G = np.asarray(G, dtype=float)
    det = np.linalg.det(G)
    if det == 0.0 or not np.isfinite(det):
        raise np.linalg.LinAlgError("RGA undefined: singular gain matrix")
    return G * np.linalg.inv(G).T


def _paired_gain(G, pairing):
    """Gain matrix with the pairing permutation folded in (diagonal pairing)."""
    G = np.asarray(G, dtype=float)
    if pairing == "swapped":
        return G[:, ::-1].copy()
    return G


def _exists_positive_magnitudes(G, pairing, signs):
    """Existence of magnitudes making both eigenvalues of H open-RHP.

    With Gp the pairing-permuted gain and S = diag(signs),
    det(H) = m1*m2*det(Gp*S) has a fixed sign, while tr(H) can be made
    positive iff some diagonal of Gp*S is positive; hence the test
    det(Gp*S) > 0 and max_i (Gp*S)_ii > 0.
    """
    Gp = _paired_gain(G, pairing)
    Hs = Gp @ np.diag(signs)
    return bool(np.linalg.det(Hs) > 0.0 and max(Hs[0, 0], Hs[1, 1]) > 0.0)


def _witness_magnitudes(G, pairing, signs, grid=None):
    """Magnitude pair maximizing the smallest eigenvalue real part of H."""
    if grid is None:
        grid = np.logspace(-2.0, 2.0, 9)
    Gp = _paired_gain(G, pairing)
    best, best_m = -np.inf, None
    for m1 in grid:
        for m2 in grid:
            H = Gp @ np.diag((signs[0] * m1, signs[1] * m2))
            worst = float(np.min(np.linalg.eigvals(H).real))
            if worst > best:
                best, best_m = worst, (float(m1), float(m2))
    return best_m if best > 0.0 else None


def ic_classify(G, cfg):
    """Classify integral controllability of H(0) = G @ C for one configuration.

    The eigenvalue trichotomy uses a 1e-9 band around the imaginary axis
    (the underlying theorem is silent there).  Alongside the verdict at the
    configured magnitudes, reports whether *any* positive magnitudes work
    and a log-grid witness that maximizes the stability margin.
    """
    G = np.asarray(G, dtype=float)
    H = G @ controller_matrix(cfg)
    eig = np.linalg.eigvals(H)
    re = eig.real
    if np.all(re > _EIG_TOL):
        cls = IC_YES
    elif np.any(re < -_EIG_TOL):
        cls = IC_NO
    else:
        cls = IC_BOUNDARY
    exists = _exists_positive_magnitudes(G, cfg.pairing, cfg.signs)
    witness = _witness_magnitudes(G, cfg.pairing, cfg.signs) if exists else None
    return ICVerdict(classification=cls, eigenvalues=eig,
                     exists_magnitudes=exists, witness=witness)


def feasible_sign_sets(G, pairing):
    """Sign pairs for which positive magnitudes exist (existence reading of
    the pairing table); ordered as in SIGN_PAIRS."""
    return [s for s in SIGN_PAIRS if _exists_positive_magnitudes(G, pairing, s)]


def sequential_signs(G, pairing, closing_order=(0, 1)):
    """Required loop-gain signs from sequential loop closing.

    The first-closed loop takes the sign of its paired open-loop gain; the
    second sees that gain divided by its relative gain (the effective gain
    with the other loop closed).  Returns the signs ordered by controlled
    output plus whether they land in the ic_classify feasible set.
    """
    Gp = _paired_gain(G, pairing)
    lam = rga(Gp)
    first, second = closing_order
    g_first = Gp[first, first]
    g_second = Gp[second, second]
    lam_second = lam[second, second]
    if g_first == 0.0 or g_second == 0.0 or lam_second == 0.0:
        raise ZeroDivisionError("sequential loop closing undefined: zero paired gain or RGA element")
    signs = [0, 0]
    signs[first] = int(np.sign(g_first))
    signs[second] = int(np.sign(g_second / lam_second))
    signs = tuple(signs)
    return signs, signs in feasible_sign_sets(G, pairing)


def uniqueness_report(analyses, cfg):
    """Which instances one fixed (pairing, signs) choice can stabilize.

    Applies the existence criterion at every instance's gain matrix and
    reports the stable subset and whether it is a singleton.
    """
    stable = [i for i, ga in enumerate(analyses)
              if _exists_positive_magnitudes(ga.gain, cfg.pairing, cfg.signs)]
    return UniquenessReport(pairing=cfg.pairing, signs=tuple(cfg.signs),
                            stable_instances=stable,
                            singleton=len(stable) == 1)


def analyze_instance(params, u, x_ss):
    """GainAnalysis (gain, RGA, open-loop eigenvalues) at one equilibrium."""
    p = params.as_array()
    xv = np.asarray(getattr(x_ss, "as_array", lambda: x_ss)(), dtype=float)
    uv = np.asarray(getattr(u, "as_array", lambda: u)(), dtype=float)
    G = gain_matrix(params, xv, uv)
    eigs = np.sort(np.linalg.eigvals(kernels.jac_x(p, xv, uv)).real)[::-1]
    det = np.linalg.det(G)
    singular = not np.isfinite(det) or det == 0.0
    return GainAnalysis(u=uv, gain=G, rga=rga(G) if not singular else np.full((2, 2), np.nan),
                        jac_eigs=eigs, singular=singular)
