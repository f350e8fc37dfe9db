# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric core: plant kernels, MPC objective/gradient, BFGS loop.

Mirrors inmux._core_py function-for-function; see that module for the
reference semantics and docstrings.  The receding-horizon simulation loop
lives here because basin sweeps evaluate it millions of times.
"""

from libc.math cimport exp, fabs, isfinite, sqrt

import numpy as np

cdef double BARRIER = 1.0e6
cdef int _STATUS_CONVERGED = 0
cdef int _STATUS_MAXITER = 1
cdef int _STATUS_LINESEARCH = 2

BARRIER_WEIGHT = BARRIER
STATUS_CONVERGED = _STATUS_CONVERGED
STATUS_MAXITER = _STATUS_MAXITER
STATUS_LINESEARCH = _STATUS_LINESEARCH

cdef int HMAX = 16        # horizon stages supported by the fixed work arrays
cdef int NMAX = 2 * 16


cdef inline void c_rates(const double* p, double u1, double* k) nogil:
    cdef double w = 1.0 / u1 - 1.0
    k[0] = p[0] * exp(-(p[4] / p[8]) * w)
    k[1] = p[1] * exp(-(p[5] / p[8]) * w)
    k[2] = p[2] * exp(-(p[6] / p[8]) * w)
    k[3] = p[3] * exp(-(p[7] / p[8]) * w)


cdef inline void c_rhs(const double* p, const double* x, const double* u,
                       double* f) nogil:
    cdef double k[4]
    cdef double invtau
    c_rates(p, u[0], k)
    invtau = (1.0 - u[1]) / (p[9] * u[1])
    f[0] = -k[0] * x[0] + k[3] * x[1] + (p[10] - x[0]) * invtau
    f[1] = (k[0] * x[0] - (k[1] + k[3]) * x[1]
            + k[2] * (1.0 - x[0] - x[1]) + (p[11] - x[1]) * invtau)


cdef inline void c_jx(const double* p, const double* u, double* J) nogil:
    # row-major 2x2; independent of x (balances are linear in x for held u)
    cdef double k[4]
    cdef double invtau
    c_rates(p, u[0], k)
    invtau = (1.0 - u[1]) / (p[9] * u[1])
    J[0] = -k[0] - invtau
    J[1] = k[3]
    J[2] = k[0] - k[2]
    J[3] = -(k[1] + k[3]) - k[2] - invtau


cdef inline void c_ju(const double* p, const double* x, const double* u,
                      double* B) nogil:
    cdef double k[4]
    cdef double scale, dk1, dk2, dk3, dk4, dinv
    c_rates(p, u[0], k)
    scale = 1.0 / (p[8] * u[0] * u[0])
    dk1 = k[0] * p[4] * scale
    dk2 = k[1] * p[5] * scale
    dk3 = k[2] * p[6] * scale
    dk4 = k[3] * p[7] * scale
    dinv = -1.0 / (p[9] * u[1] * u[1])
    B[0] = -dk1 * x[0] + dk4 * x[1]
    B[1] = (p[10] - x[0]) * dinv
    B[2] = dk1 * x[0] - (dk2 + dk4) * x[1] + dk3 * (1.0 - x[0] - x[1])
    B[3] = (p[11] - x[1]) * dinv


cdef inline void c_hold(const double* p, const double* u, double* A,
                        double* b, double* juc) nogil:
    # Affine balances for a held input: rhs(x) = A @ x + b.  juc packs the
    # input-Jacobian coefficients (dk1..dk4, dinv, x10*dinv, x20*dinv) so
    # RK4 stages need no further Arrhenius evaluations.
    cdef double k[4]
    cdef double invtau, scale
    c_rates(p, u[0], k)
    invtau = (1.0 - u[1]) / (p[9] * u[1])
    A[0] = -k[0] - invtau
    A[1] = k[3]
    A[2] = k[0] - k[2]
    A[3] = -(k[1] + k[3]) - k[2] - invtau
    b[0] = p[10] * invtau
    b[1] = k[2] + p[11] * invtau
    scale = 1.0 / (p[8] * u[0] * u[0])
    juc[0] = k[0] * p[4] * scale
    juc[1] = k[1] * p[5] * scale
    juc[2] = k[2] * p[6] * scale
    juc[3] = k[3] * p[7] * scale
    juc[4] = -1.0 / (p[9] * u[1] * u[1])
    juc[5] = p[10] * juc[4]
    juc[6] = p[11] * juc[4]


cdef inline void c_ju_stage(const double* juc, const double* x, double* B) nogil:
    # jac_u at a stage point from the precomputed hold coefficients
    B[0] = -juc[0] * x[0] + juc[3] * x[1]
    B[1] = -juc[4] * x[0] + juc[5]
    B[2] = (juc[0] - juc[2]) * x[0] + (-(juc[1] + juc[3]) - juc[2]) * x[1] + juc[2]
    B[3] = -juc[4] * x[1] + juc[6]


cdef inline void c_frhs(const double* A, const double* b, const double* x,
                        double* f) nogil:
    f[0] = A[0] * x[0] + A[1] * x[1] + b[0]
    f[1] = A[2] * x[0] + A[3] * x[1] + b[1]


cdef void c_rk4_ab(const double* A, const double* b, double* x, double dt,
                   int nsub) nogil:
    cdef double h = dt / nsub
    cdef double s1[2], s2[2], s3[2], s4[2], yt[2]
    cdef int i
    for i in range(nsub):
        c_frhs(A, b, x, s1)
        yt[0] = x[0] + 0.5 * h * s1[0]; yt[1] = x[1] + 0.5 * h * s1[1]
        c_frhs(A, b, yt, s2)
        yt[0] = x[0] + 0.5 * h * s2[0]; yt[1] = x[1] + 0.5 * h * s2[1]
        c_frhs(A, b, yt, s3)
        yt[0] = x[0] + h * s3[0]; yt[1] = x[1] + h * s3[1]
        c_frhs(A, b, yt, s4)
        x[0] = x[0] + (h / 6.0) * (s1[0] + 2.0 * s2[0] + 2.0 * s3[0] + s4[0])
        x[1] = x[1] + (h / 6.0) * (s1[1] + 2.0 * s2[1] + 2.0 * s3[1] + s4[1])


cdef void c_rk4(const double* p, double* x, const double* u, double dt,
                int nsub) nogil:
    cdef double A[4], b[2], juc[7]
    c_hold(p, u, A, b, juc)
    c_rk4_ab(A, b, x, dt, nsub)


cdef void c_rk4_tan(const double* p, double* x, const double* u, double dt,
                    int nsub, double* M, double* P) nogil:
    # Propagates x plus tangents M = dx'/dx0 (init I) and P = dx'/du (init 0).
    # The 2x4 block [M P] is advanced through the same RK4 stages as x.
    cdef double h = dt / nsub
    cdef double A[4], b[2], juc[7], Bs[4]
    cdef double s[4][2]          # stage slopes for the state
    cdef double D[4][8]          # stage slopes for [M P], row-major 2x4
    cdef double W[8], base[8]
    cdef double yt[2]
    cdef int i, j, r, c
    c_hold(p, u, A, b, juc)
    M[0] = 1.0; M[1] = 0.0; M[2] = 0.0; M[3] = 1.0
    P[0] = 0.0; P[1] = 0.0; P[2] = 0.0; P[3] = 0.0
    for i in range(nsub):
        base[0] = M[0]; base[1] = M[1]; base[2] = P[0]; base[3] = P[1]
        base[4] = M[2]; base[5] = M[3]; base[6] = P[2]; base[7] = P[3]
        # stage 1 at x
        c_frhs(A, b, x, s[0])
        c_ju_stage(juc, x, Bs)
        for r in range(2):
            for c in range(4):
                D[0][4 * r + c] = A[2 * r] * base[c] + A[2 * r + 1] * base[4 + c]
            D[0][4 * r + 2] += Bs[2 * r]
            D[0][4 * r + 3] += Bs[2 * r + 1]
        # stages 2..4
        for j in range(1, 4):
            if j < 3:
                yt[0] = x[0] + 0.5 * h * s[j - 1][0]
                yt[1] = x[1] + 0.5 * h * s[j - 1][1]
                for c in range(8):
                    W[c] = base[c] + 0.5 * h * D[j - 1][c]
            else:
                yt[0] = x[0] + h * s[j - 1][0]
                yt[1] = x[1] + h * s[j - 1][1]
                for c in range(8):
                    W[c] = base[c] + h * D[j - 1][c]
            c_frhs(A, b, yt, s[j])
            c_ju_stage(juc, yt, Bs)
            for r in range(2):
                for c in range(4):
                    D[j][4 * r + c] = A[2 * r] * W[c] + A[2 * r + 1] * W[4 + c]
                D[j][4 * r + 2] += Bs[2 * r]
                D[j][4 * r + 3] += Bs[2 * r + 1]
        x[0] = x[0] + (h / 6.0) * (s[0][0] + 2.0 * s[1][0] + 2.0 * s[2][0] + s[3][0])
        x[1] = x[1] + (h / 6.0) * (s[0][1] + 2.0 * s[1][1] + 2.0 * s[2][1] + s[3][1])
        for c in range(8):
            base[c] = base[c] + (h / 6.0) * (D[0][c] + 2.0 * D[1][c] + 2.0 * D[2][c] + D[3][c])
        M[0] = base[0]; M[1] = base[1]; P[0] = base[2]; P[1] = base[3]
        M[2] = base[4]; M[3] = base[5]; P[2] = base[6]; P[3] = base[7]


cdef inline double c_clamp_stage(const double* u, const double* ubox,
                                 double* ucl, double* v) nogil:
    # ubox = (u1_lo, u1_hi, u2_lo, u2_hi); returns squared-violation penalty
    cdef int j
    cdef double lo, hi
    for j in range(2):
        lo = ubox[2 * j]; hi = ubox[2 * j + 1]
        v[j] = 0.0
        ucl[j] = u[j]
        if u[j] < lo:
            v[j] = u[j] - lo
            ucl[j] = lo
        elif u[j] > hi:
            v[j] = u[j] - hi
            ucl[j] = hi
    return BARRIER * (v[0] * v[0] + v[1] * v[1])


cdef double c_cost(const double* p, const double* x0, const double* u_prev,
                   const double* z, int H, const double* rset,
                   const double* ky, const double* ku, double dt, int nsub,
                   const double* ubox) nogil:
    cdef double cost = 0.0
    cdef double y[2], up[2], ucl[2], v[2], e[2], du[2]
    cdef int j
    y[0] = x0[0]; y[1] = x0[1]
    up[0] = u_prev[0]; up[1] = u_prev[1]
    for j in range(H):
        cost += c_clamp_stage(z + 2 * j, ubox, ucl, v)
        c_rk4(p, y, ucl, dt, nsub)
        e[0] = y[0] - rset[0]; e[1] = y[1] - rset[1]
        du[0] = z[2 * j] - up[0]; du[1] = z[2 * j + 1] - up[1]
        cost += (e[0] * (ky[0] * e[0] + ky[1] * e[1])
                 + e[1] * (ky[2] * e[0] + ky[3] * e[1]))
        cost += (du[0] * (ku[0] * du[0] + ku[1] * du[1])
                 + du[1] * (ku[2] * du[0] + ku[3] * du[1]))
        up[0] = z[2 * j]; up[1] = z[2 * j + 1]
    return cost


cdef double c_cost_grad(const double* p, const double* x0, const double* u_prev,
                        const double* z, int H, const double* rset,
                        const double* ky, const double* ku, double dt, int nsub,
                        const double* ubox, double* grad) nogil:
    cdef double cost = 0.0
    cdef double y[2], up[2], ucl[2], v[2], e[2], du[2], kdu[2]
    cdef double Ms[16][4], Ps[16][4], tr[16][2], mask[16][2]
    cdef double vacc[2], vnew[2], pv[2]
    cdef int j
    y[0] = x0[0]; y[1] = x0[1]
    up[0] = u_prev[0]; up[1] = u_prev[1]
    for j in range(2 * H):
        grad[j] = 0.0
    for j in range(H):
        cost += c_clamp_stage(z + 2 * j, ubox, ucl, v)
        mask[j][0] = 1.0 if v[0] == 0.0 else 0.0
        mask[j][1] = 1.0 if v[1] == 0.0 else 0.0
        c_rk4_tan(p, y, ucl, dt, nsub, &Ms[j][0], &Ps[j][0])
        e[0] = y[0] - rset[0]; e[1] = y[1] - rset[1]
        tr[j][0] = e[0]; tr[j][1] = e[1]
        du[0] = z[2 * j] - up[0]; du[1] = z[2 * j + 1] - up[1]
        kdu[0] = ku[0] * du[0] + ku[1] * du[1]
        kdu[1] = ku[2] * du[0] + ku[3] * du[1]
        cost += (e[0] * (ky[0] * e[0] + ky[1] * e[1])
                 + e[1] * (ky[2] * e[0] + ky[3] * e[1]))
        cost += du[0] * kdu[0] + du[1] * kdu[1]
        grad[2 * j] += 2.0 * kdu[0] + 2.0 * BARRIER * v[0]
        grad[2 * j + 1] += 2.0 * kdu[1] + 2.0 * BARRIER * v[1]
        if j > 0:
            grad[2 * j - 2] -= 2.0 * kdu[0]
            grad[2 * j - 1] -= 2.0 * kdu[1]
        up[0] = z[2 * j]; up[1] = z[2 * j + 1]
    vacc[0] = 0.0; vacc[1] = 0.0
    for j in range(H - 1, -1, -1):
        vnew[0] = 2.0 * (ky[0] * tr[j][0] + ky[1] * tr[j][1])
        vnew[1] = 2.0 * (ky[2] * tr[j][0] + ky[3] * tr[j][1])
        if j + 1 < H:
            vnew[0] += Ms[j + 1][0] * vacc[0] + Ms[j + 1][2] * vacc[1]
            vnew[1] += Ms[j + 1][1] * vacc[0] + Ms[j + 1][3] * vacc[1]
        vacc[0] = vnew[0]; vacc[1] = vnew[1]
        pv[0] = Ps[j][0] * vacc[0] + Ps[j][2] * vacc[1]
        pv[1] = Ps[j][1] * vacc[0] + Ps[j][3] * vacc[1]
        grad[2 * j] += mask[j][0] * pv[0]
        grad[2 * j + 1] += mask[j][1] * pv[1]
    return cost


cdef int c_mpc_step(const double* p, const double* x, const double* u_prev,
                    const double* rset, const double* ky, const double* ku,
                    int H, double dt, int nsub, const double* ubox,
                    double gtol, int max_iter, double* u_next,
                    double* cost_out, double* gnorm_out, int* iters) nogil:
    cdef double z[32], g[32], gnew[32], d[32], znew[32], s[32], yv[32]
    cdef double Hinv[1024], A[1024], T[1024]
    cdef int n = 2 * H
    cdef int i, j, k, it, ls, status
    cdef double f, fnew, gnorm, slope, alpha, sy, snorm, ynorm, rho
    cdef double vdum[2]
    for j in range(H):
        z[2 * j] = u_prev[0]
        z[2 * j + 1] = u_prev[1]
    f = c_cost_grad(p, x, u_prev, z, H, rset, ky, ku, dt, nsub, ubox, g)
    for i in range(n):
        for j in range(n):
            Hinv[i * n + j] = 1.0 if i == j else 0.0
    status = _STATUS_MAXITER
    it = 0
    while it < max_iter:
        gnorm = 0.0
        for i in range(n):
            if fabs(g[i]) > gnorm:
                gnorm = fabs(g[i])
        if gnorm < gtol:
            status = _STATUS_CONVERGED
            break
        slope = 0.0
        for i in range(n):
            d[i] = 0.0
            for j in range(n):
                d[i] -= Hinv[i * n + j] * g[j]
        for i in range(n):
            slope += g[i] * d[i]
        if slope >= 0.0:
            for i in range(n):
                for j in range(n):
                    Hinv[i * n + j] = 1.0 if i == j else 0.0
                d[i] = -g[i]
            slope = 0.0
            for i in range(n):
                slope += g[i] * d[i]
        alpha = 1.0
        fnew = 0.0
        ls = -1
        for k in range(40):
            for i in range(n):
                znew[i] = z[i] + alpha * d[i]
            fnew = c_cost(p, x, u_prev, znew, H, rset, ky, ku, dt, nsub, ubox)
            if isfinite(fnew) and fnew <= f + 1.0e-4 * alpha * slope:
                ls = k
                break
            alpha *= 0.5
        if ls < 0:
            status = _STATUS_LINESEARCH
            break
        for i in range(n):
            znew[i] = z[i] + alpha * d[i]
        fnew = c_cost_grad(p, x, u_prev, znew, H, rset, ky, ku, dt, nsub, ubox, gnew)
        sy = 0.0; snorm = 0.0; ynorm = 0.0
        for i in range(n):
            s[i] = znew[i] - z[i]
            yv[i] = gnew[i] - g[i]
            sy += s[i] * yv[i]
            snorm += s[i] * s[i]
            ynorm += yv[i] * yv[i]
        if sy > 1.0e-12 * sqrt(snorm) * sqrt(ynorm):
            rho = 1.0 / sy
            for i in range(n):
                for j in range(n):
                    A[i * n + j] = (1.0 if i == j else 0.0) - rho * s[i] * yv[j]
            for i in range(n):
                for j in range(n):
                    T[i * n + j] = 0.0
                    for k in range(n):
                        T[i * n + j] += A[i * n + k] * Hinv[k * n + j]
            for i in range(n):
                for j in range(n):
                    Hinv[i * n + j] = rho * s[i] * s[j]
                    for k in range(n):
                        Hinv[i * n + j] += T[i * n + k] * A[j * n + k]
        for i in range(n):
            z[i] = znew[i]
            g[i] = gnew[i]
        f = fnew
        it += 1
    gnorm = 0.0
    for i in range(n):
        if fabs(g[i]) > gnorm:
            gnorm = fabs(g[i])
    c_clamp_stage(z, ubox, u_next, vdum)
    cost_out[0] = f
    gnorm_out[0] = gnorm
    iters[0] = it
    return status


def rate_constants(double[::1] p, double u1):
    out = np.empty(4)
    cdef double[::1] o = out
    c_rates(&p[0], u1, &o[0])
    return out


def rhs(double[::1] p, double[::1] x, double[::1] u):
    out = np.empty(2)
    cdef double[::1] o = out
    c_rhs(&p[0], &x[0], &u[0], &o[0])
    return out


def jac_x(double[::1] p, double[::1] x, double[::1] u):
    out = np.empty((2, 2))
    cdef double[:, ::1] o = out
    c_jx(&p[0], &u[0], &o[0, 0])
    return out


def jac_u(double[::1] p, double[::1] x, double[::1] u):
    out = np.empty((2, 2))
    cdef double[:, ::1] o = out
    c_ju(&p[0], &x[0], &u[0], &o[0, 0])
    return out


def rk4_hold(double[::1] p, double[::1] x, double[::1] u, double dt, int nsub):
    out = np.array(x, dtype=float)
    cdef double[::1] o = out
    c_rk4(&p[0], &o[0], &u[0], dt, nsub)
    return out


def predict_hold(double[::1] p, double[::1] x, useq, double dt, int nsub):
    us = np.ascontiguousarray(np.asarray(useq, dtype=float).reshape(-1, 2))
    cdef double[:, ::1] uv = us
    cdef int H = us.shape[0]
    out = np.empty((H, 2))
    cdef double[:, ::1] o = out
    cdef double y[2]
    cdef int j
    y[0] = x[0]; y[1] = x[1]
    for j in range(H):
        c_rk4(&p[0], y, &uv[j, 0], dt, nsub)
        o[j, 0] = y[0]; o[j, 1] = y[1]
    return out


def mpc_cost(double[::1] p, double[::1] x, double[::1] u_prev, useq,
             double[::1] rset, ky, ku, double dt, int nsub, ubox):
    z = np.ascontiguousarray(np.asarray(useq, dtype=float).ravel())
    kya = np.ascontiguousarray(np.asarray(ky, dtype=float).ravel())
    kua = np.ascontiguousarray(np.asarray(ku, dtype=float).ravel())
    ub = np.ascontiguousarray(np.asarray(ubox, dtype=float).ravel())
    cdef double[::1] zv = z
    cdef double[::1] kyv = kya
    cdef double[::1] kuv = kua
    cdef double[::1] ubv = ub
    cdef int H = z.shape[0] // 2
    if H > HMAX:
        raise ValueError("horizon exceeds compiled limit of %d stages" % HMAX)
    return c_cost(&p[0], &x[0], &u_prev[0], &zv[0], H, &rset[0],
                  &kyv[0], &kuv[0], dt, nsub, &ubv[0])


def mpc_cost_grad(double[::1] p, double[::1] x, double[::1] u_prev, useq,
                  double[::1] rset, ky, ku, double dt, int nsub, ubox):
    z = np.ascontiguousarray(np.asarray(useq, dtype=float).ravel())
    kya = np.ascontiguousarray(np.asarray(ky, dtype=float).ravel())
    kua = np.ascontiguousarray(np.asarray(ku, dtype=float).ravel())
    ub = np.ascontiguousarray(np.asarray(ubox, dtype=float).ravel())
    cdef double[::1] zv = z
    cdef double[::1] kyv = kya
    cdef double[::1] kuv = kua
    cdef double[::1] ubv = ub
    cdef int H = z.shape[0] // 2
    if H > HMAX:
        raise ValueError("horizon exceeds compiled limit of %d stages" % HMAX)
    grad = np.empty(2 * H)
    cdef double[::1] gv = grad
    cost = c_cost_grad(&p[0], &x[0], &u_prev[0], &zv[0], H, &rset[0],
                       &kyv[0], &kuv[0], dt, nsub, &ubv[0], &gv[0])
    return float(cost), grad


def mpc_step(double[::1] p, double[::1] x, double[::1] u_prev,
             double[::1] rset, ky, ku, int H, double dt, int nsub, ubox,
             double gtol, int max_iter):
    kya = np.ascontiguousarray(np.asarray(ky, dtype=float).ravel())
    kua = np.ascontiguousarray(np.asarray(ku, dtype=float).ravel())
    ub = np.ascontiguousarray(np.asarray(ubox, dtype=float).ravel())
    cdef double[::1] kyv = kya
    cdef double[::1] kuv = kua
    cdef double[::1] ubv = ub
    if H > HMAX:
        raise ValueError("horizon exceeds compiled limit of %d stages" % HMAX)
    u_next = np.empty(2)
    cdef double[::1] un = u_next
    cdef double cost = 0.0, gnorm = 0.0
    cdef int iters = 0
    cdef int status
    status = c_mpc_step(&p[0], &x[0], &u_prev[0], &rset[0], &kyv[0], &kuv[0],
                        H, dt, nsub, &ubv[0], gtol, max_iter,
                        &un[0], &cost, &gnorm, &iters)
    return u_next, float(cost), float(gnorm), int(status), int(iters)


def mpc_sim(double[::1] p, double[::1] x0, double[::1] u0, double[::1] rset,
            ky, ku, int H, double dt, int nsub, ubox, double gtol,
            int max_iter, int max_steps, targets, double y_tol, double u_tol,
            int hold_steps):
    kya = np.ascontiguousarray(np.asarray(ky, dtype=float).ravel())
    kua = np.ascontiguousarray(np.asarray(ku, dtype=float).ravel())
    ub = np.ascontiguousarray(np.asarray(ubox, dtype=float).ravel())
    tg = np.ascontiguousarray(np.asarray(targets, dtype=float).reshape(-1, 2))
    cdef double[::1] kyv = kya
    cdef double[::1] kuv = kua
    cdef double[::1] ubv = ub
    cdef double[:, ::1] tgv = tg
    cdef int ntg = tg.shape[0]
    if H > HMAX:
        raise ValueError("horizon exceeds compiled limit of %d stages" % HMAX)
    traj = np.empty((max_steps + 1, 8))
    cdef double[:, ::1] tv = traj
    cdef double x[2], u[2], un[2]
    cdef double cost = 0.0, gnorm = 0.0, dev
    cdef int iters = 0, status = 0
    cdef int kstep, i, j, label = 0, streak = 0, streak_i = -1, hit, steps = 0
    x[0] = x0[0]; x[1] = x0[1]
    u[0] = u0[0]; u[1] = u0[1]
    tv[0, 0] = 0.0; tv[0, 1] = x[0]; tv[0, 2] = x[1]
    tv[0, 3] = u[0]; tv[0, 4] = u[1]
    tv[0, 5] = np.nan; tv[0, 6] = np.nan; tv[0, 7] = 0.0
    for kstep in range(1, max_steps + 1):
        status = c_mpc_step(&p[0], x, u, &rset[0], &kyv[0], &kuv[0],
                            H, dt, nsub, &ubv[0], gtol, max_iter,
                            un, &cost, &gnorm, &iters)
        u[0] = un[0]; u[1] = un[1]
        c_rk4(&p[0], x, u, dt, nsub)
        tv[kstep, 0] = kstep * dt
        tv[kstep, 1] = x[0]; tv[kstep, 2] = x[1]
        tv[kstep, 3] = u[0]; tv[kstep, 4] = u[1]
        tv[kstep, 5] = cost; tv[kstep, 6] = gnorm; tv[kstep, 7] = status
        steps = kstep
        if max(fabs(x[0] - rset[0]), fabs(x[1] - rset[1])) < y_tol:
            hit = -1
            for i in range(ntg):
                dev = max(fabs(u[0] - tgv[i, 0]), fabs(u[1] - tgv[i, 1]))
                if dev < u_tol:
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
