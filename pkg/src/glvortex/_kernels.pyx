# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled polar-grid kernels; same contracts as _kernels_py."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def stiffness_apply(double complex[:, ::1] psi, double[::1] a, double[::1] c):
    cdef Py_ssize_t nr = psi.shape[0], nt = psi.shape[1], j, k, kp, km
    out_arr = np.empty((nr, nt), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex v
    for j in range(nr):
        for k in range(nt):
            kp = k + 1 if k + 1 < nt else 0
            km = k - 1 if k > 0 else nt - 1
            v = psi[j, k]
            out[j, k] = c[j] * (2.0 * v - psi[j, kp] - psi[j, km])
            if j + 1 < nr:
                out[j, k] = out[j, k] + a[j] * (v - psi[j + 1, k])
            if j > 0:
                out[j, k] = out[j, k] + a[j - 1] * (v - psi[j - 1, k])
    return out_arr


def energy_gradient(double complex[:, ::1] pp, double complex[:, ::1] pm,
                    double[::1] a, double[::1] c, double[::1] w, double lam, double beta):
    cdef Py_ssize_t nr = pp.shape[0], nt = pp.shape[1], j, k
    gp_arr = stiffness_apply(pp, a, c)
    gm_arr = stiffness_apply(pm, a, c)
    cdef double complex[:, ::1] gp = gp_arr
    cdef double complex[:, ::1] gm = gm_arr
    cdef double dirichlet = 0.0, iso = 0.0, spin = 0.0
    cdef double rp, rm, s, d, wj
    cdef double complex up, um
    for j in range(nr):
        wj = w[j]
        for k in range(nt):
            up = pp[j, k]
            um = pm[j, k]
            dirichlet += (up.real * gp[j, k].real + up.imag * gp[j, k].imag
                          + um.real * gm[j, k].real + um.imag * gm[j, k].imag)
            rp = up.real * up.real + up.imag * up.imag
            rm = um.real * um.real + um.imag * um.imag
            s = rp + rm - 1.0
            d = rp - rm
            iso += wj * s * s
            spin += wj * d * d
            gp[j, k] = gp[j, k] + lam * wj * (s + beta * d) * up
            gm[j, k] = gm[j, k] + lam * wj * (s - beta * d) * um
    return 0.5 * dirichlet, 0.25 * lam * iso, 0.25 * lam * beta * spin, gp_arr, gm_arr


def tridiag_solve(double[::1] sub, double[:, ::1] diag, double complex[:, ::1] rhs):
    cdef Py_ssize_t m = diag.shape[0], n = diag.shape[1], i, j
    x_arr = np.empty((m, n), dtype=np.complex128)
    cp_arr = np.empty(n, dtype=np.float64)
    cdef double complex[:, ::1] x = x_arr
    cdef double[::1] cp = cp_arr
    cdef double b
    for i in range(m):
        b = diag[i, 0]
        x[i, 0] = rhs[i, 0] / b
        for j in range(1, n):
            cp[j - 1] = sub[j - 1] / b
            b = diag[i, j] - sub[j - 1] * cp[j - 1]
            x[i, j] = (rhs[i, j] - sub[j - 1] * x[i, j - 1]) / b
        for j in range(n - 2, -1, -1):
            x[i, j] = x[i, j] - cp[j] * x[i, j + 1]
    return x_arr
