# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernels: pairwise jet interaction sum and fused RK4.

Operation-for-operation mirror of flockuq._core_py (same accumulation
order, same elementary-op sequence); see that module for the contracts.
Compiled with -ffp-contract=off so no fused multiply-adds sneak in.
"""

from libc.math cimport exp, log, fabs

import numpy as np

from flockuq._core_py import BlowUpError

NAME = "compiled"


cdef inline void _mul(const double* f, const double* g, double* out, int m,
                      const double* B, int ld) noexcept nogil:
    cdef int n, k
    cdef double acc
    for n in range(m + 1):
        acc = B[n * ld] * f[0] * g[n]
        for k in range(1, n + 1):
            acc = acc + B[n * ld + k] * f[k] * g[n - k]
        out[n] = acc


cdef inline void _log(const double* u, double* out, int m,
                      const double* B, int ld) noexcept nogil:
    cdef int n, j
    cdef double acc
    out[0] = log(u[0])
    for n in range(1, m + 1):
        acc = 0.0
        for j in range(n - 1):
            acc = acc + B[(n - 1) * ld + j] * out[j + 1] * u[n - 1 - j]
        out[n] = (u[n] - acc) / u[0]


cdef inline void _exp(const double* e, double* out, int m,
                      const double* B, int ld) noexcept nogil:
    cdef int n, j
    cdef double acc
    out[0] = exp(e[0])
    for n in range(1, m + 1):
        acc = B[(n - 1) * ld] * e[1] * out[n - 1]
        for j in range(1, n):
            acc = acc + B[(n - 1) * ld + j] * e[j + 1] * out[n - 1 - j]
        out[n] = acc


cdef void _accel(const double* Xj, const double* Vj, int N, int d, int m,
                 double psi0, double k0, double k1, double nb0, double nb1,
                 const double* B, int ld, double* A, double* scr) noexcept nogil:
    cdef int M1 = m + 1
    cdef double* dxy = scr
    cdef double* s = scr + M1
    cdef double* L = scr + 2 * M1
    cdef double* e = scr + 3 * M1
    cdef double* w = scr + 4 * M1
    cdef double* psi = scr + 5 * M1
    cdef double* tmp = scr + 6 * M1
    cdef int i, j, dd, k, n
    cdef Py_ssize_t idx
    cdef double invN = 1.0 / N
    cdef const double* pj
    cdef const double* pi
    cdef double* ap
    for idx in range(<Py_ssize_t> N * d * M1):
        A[idx] = 0.0
    for i in range(N):
        for j in range(N):
            for n in range(M1):
                s[n] = 0.0
            for dd in range(d):
                pj = Xj + (j * d + dd) * M1
                pi = Xj + (i * d + dd) * M1
                for k in range(M1):
                    dxy[k] = pj[k] - pi[k]
                _mul(dxy, dxy, tmp, m, B, ld)
                for n in range(M1):
                    s[n] = s[n] + tmp[n]
            s[0] = 1.0 + s[0]
            _log(s, L, m, B, ld)
            e[0] = nb0 * L[0]
            for n in range(1, M1):
                e[n] = nb0 * L[n] + (n * nb1) * L[n - 1]
            _exp(e, w, m, B, ld)
            psi[0] = k0 * w[0] + psi0
            for n in range(1, M1):
                psi[n] = k0 * w[n] + (n * k1) * w[n - 1]
            for dd in range(d):
                pj = Vj + (j * d + dd) * M1
                pi = Vj + (i * d + dd) * M1
                for k in range(M1):
                    dxy[k] = pj[k] - pi[k]
                _mul(psi, dxy, tmp, m, B, ld)
                ap = A + (i * d + dd) * M1
                for n in range(M1):
                    ap[n] = ap[n] + tmp[n]
    for idx in range(<Py_ssize_t> N * d * M1):
        A[idx] = A[idx] * invN


def jet_accel(double[:, :, ::1] Xj, double[:, :, ::1] Vj, double psi0,
              double k0, double k1, double nb0, double nb1,
              double[:, ::1] binom):
    """Jet of the interaction acceleration; shapes (N, d, m+1)."""
    cdef int N = Xj.shape[0]
    cdef int d = Xj.shape[1]
    cdef int M1 = Xj.shape[2]
    A = np.zeros((N, d, M1))
    scr = np.empty(7 * M1)
    cdef double[:, :, ::1] Am = A
    cdef double[::1] scrm = scr
    with nogil:
        _accel(&Xj[0, 0, 0], &Vj[0, 0, 0], N, d, M1 - 1, psi0, k0, k1, nb0, nb1,
               &binom[0, 0], M1, &Am[0, 0, 0], &scrm[0])
    return A


def jet_rk4(double[:, :, ::1] Xj, double[:, :, ::1] Vj, double psi0,
            double k0, double k1, double nb0, double nb1,
            double[:, ::1] binom, double dt, long n_steps, long save_every,
            double blowup=1e12):
    """Fused fixed-step RK4 on the jet system; see the fallback for contracts."""
    if n_steps % save_every != 0:
        raise ValueError("n_steps must be a multiple of save_every")
    cdef int N = Xj.shape[0]
    cdef int d = Xj.shape[1]
    cdef int M1 = Xj.shape[2]
    cdef long n_save = n_steps // save_every
    cdef Py_ssize_t total = <Py_ssize_t> N * d * M1

    Xout_a = np.empty((n_save + 1, N, d, M1))
    Vout_a = np.empty((n_save + 1, N, d, M1))
    X_a = np.array(Xj, dtype=float)
    V_a = np.array(Vj, dtype=float)
    X2_a = np.empty_like(X_a); X3_a = np.empty_like(X_a); X4_a = np.empty_like(X_a)
    V2_a = np.empty_like(V_a); V3_a = np.empty_like(V_a); V4_a = np.empty_like(V_a)
    A1_a = np.empty_like(V_a); A2_a = np.empty_like(V_a)
    A3_a = np.empty_like(V_a); A4_a = np.empty_like(V_a)
    scr_a = np.empty(7 * M1)

    cdef double[:, :, :, ::1] Xout = Xout_a
    cdef double[:, :, :, ::1] Vout = Vout_a
    cdef double[:, :, ::1] Xm = X_a, Vm = V_a
    cdef double[:, :, ::1] X2 = X2_a, X3 = X3_a, X4 = X4_a
    cdef double[:, :, ::1] V2 = V2_a, V3 = V3_a, V4 = V4_a
    cdef double[:, :, ::1] A1 = A1_a, A2 = A2_a, A3 = A3_a, A4 = A4_a
    cdef double[::1] scrm = scr_a

    cdef double* x = &Xm[0, 0, 0]
    cdef double* v = &Vm[0, 0, 0]
    cdef double* x2 = &X2[0, 0, 0]
    cdef double* x3 = &X3[0, 0, 0]
    cdef double* x4 = &X4[0, 0, 0]
    cdef double* v2 = &V2[0, 0, 0]
    cdef double* v3 = &V3[0, 0, 0]
    cdef double* v4 = &V4[0, 0, 0]
    cdef double* a1 = &A1[0, 0, 0]
    cdef double* a2 = &A2[0, 0, 0]
    cdef double* a3 = &A3[0, 0, 0]
    cdef double* a4 = &A4[0, 0, 0]
    cdef double* xo = &Xout[0, 0, 0, 0]
    cdef double* vo = &Vout[0, 0, 0, 0]
    cdef double* B = &binom[0, 0]
    cdef double* scr = &scrm[0]

    cdef double hdt = 0.5 * dt
    cdef double dt6 = dt / 6.0
    cdef long step, ks
    cdef Py_ssize_t idx
    cdef long bad_step = 0
    cdef int m = M1 - 1

    for idx in range(total):
        xo[idx] = x[idx]
        vo[idx] = v[idx]

    with nogil:
        for step in range(n_steps):
            _accel(x, v, N, d, m, psi0, k0, k1, nb0, nb1, B, M1, a1, scr)
            for idx in range(total):
                x2[idx] = x[idx] + hdt * v[idx]
                v2[idx] = v[idx] + hdt * a1[idx]
            _accel(x2, v2, N, d, m, psi0, k0, k1, nb0, nb1, B, M1, a2, scr)
            for idx in range(total):
                x3[idx] = x[idx] + hdt * v2[idx]
                v3[idx] = v[idx] + hdt * a2[idx]
            _accel(x3, v3, N, d, m, psi0, k0, k1, nb0, nb1, B, M1, a3, scr)
            for idx in range(total):
                x4[idx] = x[idx] + dt * v3[idx]
                v4[idx] = v[idx] + dt * a3[idx]
            _accel(x4, v4, N, d, m, psi0, k0, k1, nb0, nb1, B, M1, a4, scr)
            for idx in range(total):
                x[idx] = x[idx] + dt6 * (((v[idx] + 2.0 * v2[idx]) + 2.0 * v3[idx]) + v4[idx])
                v[idx] = v[idx] + dt6 * (((a1[idx] + 2.0 * a2[idx]) + 2.0 * a3[idx]) + a4[idx])
            if (step + 1) % save_every == 0:
                ks = (step + 1) // save_every
                for idx in range(total):
                    xo[ks * total + idx] = x[idx]
                    vo[ks * total + idx] = v[idx]
                for idx in range(total):
                    if not (fabs(x[idx]) <= blowup and fabs(v[idx]) <= blowup):
                        bad_step = step + 1
                        break
                if bad_step != 0:
                    break
    if bad_step != 0:
        raise BlowUpError(f"entry exceeded {blowup:g} at step {bad_step}")
    return Xout_a, Vout_a
