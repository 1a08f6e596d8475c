# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled selective-scan kernels.

Shapes: x, delta (Bt, L, E); A (E, N); B, C (Bt, L, N); D (E,);
states h (Bt, L, E, N).  Same contract as ``semnet._scan_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double SERIES_THRESHOLD = 1e-4


cdef inline void _zoh(double dt, double a_cont, double* abar, double* g,
                      double* dg_ddt, double* dg_da) noexcept nogil:
    cdef double z = dt * a_cont
    cdef double ez
    if fabs(z) < SERIES_THRESHOLD:
        abar[0] = exp(z)
        g[0] = dt * (1.0 + z * (0.5 + z / 6.0))
        dg_ddt[0] = 1.0 + z * (1.0 + 0.5 * z)
        dg_da[0] = dt * dt * (0.5 + z / 3.0)
    else:
        ez = exp(z)
        abar[0] = ez
        g[0] = expm1(z) / a_cont
        dg_ddt[0] = ez
        dg_da[0] = (z * ez - expm1(z)) / (a_cont * a_cont)


def linear_scan(double[:, ::1] a, double[:, ::1] b):
    """Inclusive scan of h_t = a_t * h_{t-1} + b_t along axis 0, h_{-1} = 0."""
    cdef Py_ssize_t L = a.shape[0], M = a.shape[1], t, m
    out = np.empty((L, M))
    cdef double[:, ::1] h = out
    with nogil:
        for m in range(M):
            h[0, m] = b[0, m]
        for t in range(1, L):
            for m in range(M):
                h[t, m] = a[t, m] * h[t - 1, m] + b[t, m]
    return out


def ssm_forward(double[:, :, ::1] x, double[:, :, ::1] delta, double[:, ::1] A,
                double[:, :, ::1] B, double[:, :, ::1] C, double[::1] D):
    cdef Py_ssize_t Bt = x.shape[0], L = x.shape[1], E = x.shape[2], N = A.shape[1]
    cdef Py_ssize_t b, t, d, n
    cdef double abar, g, unused1, unused2, hn, acc, xt, dt
    y_arr = np.empty((Bt, L, E))
    h_arr = np.empty((Bt, L, E, N))
    cdef double[:, :, ::1] y = y_arr
    cdef double[:, :, :, ::1] h = h_arr
    with nogil:
        for b in range(Bt):
            for d in range(E):
                for t in range(L):
                    xt = x[b, t, d]
                    dt = delta[b, t, d]
                    acc = 0.0
                    for n in range(N):
                        _zoh(dt, A[d, n], &abar, &g, &unused1, &unused2)
                        if t > 0:
                            hn = abar * h[b, t - 1, d, n] + g * B[b, t, n] * xt
                        else:
                            hn = g * B[b, t, n] * xt
                        h[b, t, d, n] = hn
                        acc = acc + C[b, t, n] * hn
                    y[b, t, d] = acc + D[d] * xt
    return y_arr, h_arr


def ssm_backward(double[:, :, ::1] dy, double[:, :, ::1] x, double[:, :, ::1] delta,
                 double[:, ::1] A, double[:, :, ::1] B, double[:, :, ::1] C, double[::1] D,
                 double[:, :, :, ::1] h):
    cdef Py_ssize_t Bt = x.shape[0], L = x.shape[1], E = x.shape[2], N = A.shape[1]
    cdef Py_ssize_t b, t, d, n
    cdef double abar, g, dgd, dga, dh, hprev, dyt, xt, dt, acc_dx, acc_ddt, dgv, da
    dx_arr = np.empty((Bt, L, E))
    ddelta_arr = np.empty((Bt, L, E))
    dA_arr = np.zeros((E, N))
    dB_arr = np.zeros((Bt, L, N))
    dC_arr = np.zeros((Bt, L, N))
    dD_arr = np.zeros(E)
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, :, ::1] ddelta = ddelta_arr
    cdef double[:, ::1] dA = dA_arr
    cdef double[:, :, ::1] dB = dB_arr
    cdef double[:, :, ::1] dC = dC_arr
    cdef double[::1] dD = dD_arr
    cdef double* carry = <double*> malloc(N * sizeof(double))
    if carry == NULL:
        raise MemoryError()
    try:
        with nogil:
            for b in range(Bt):
                for d in range(E):
                    for n in range(N):
                        carry[n] = 0.0
                    for t in range(L - 1, -1, -1):
                        dyt = dy[b, t, d]
                        xt = x[b, t, d]
                        dt = delta[b, t, d]
                        acc_dx = D[d] * dyt
                        acc_ddt = 0.0
                        for n in range(N):
                            dh = C[b, t, n] * dyt + carry[n]
                            hprev = h[b, t - 1, d, n] if t > 0 else 0.0
                            _zoh(dt, A[d, n], &abar, &g, &dgd, &dga)
                            da = dh * hprev
                            acc_dx = acc_dx + dh * g * B[b, t, n]
                            dB[b, t, n] += dh * g * xt
                            dgv = dh * B[b, t, n] * xt
                            acc_ddt = acc_ddt + da * abar * A[d, n] + dgv * dgd
                            dA[d, n] += da * abar * dt + dgv * dga
                            dC[b, t, n] += dyt * h[b, t, d, n]
                            carry[n] = abar * dh
                        dx[b, t, d] = acc_dx
                        ddelta[b, t, d] = acc_ddt
                        dD[d] += dyt * xt
    finally:
        free(carry)
    return dx_arr, ddelta_arr, dA_arr, dB_arr, dC_arr, dD_arr


def ssm_scan(double[:, :, ::1] x, double[:, :, ::1] delta, double[:, ::1] A,
             double[:, :, ::1] B, double[:, :, ::1] C, double[::1] D):
    """Forward-only scan; keeps one N-vector of state instead of all steps."""
    cdef Py_ssize_t Bt = x.shape[0], L = x.shape[1], E = x.shape[2], N = A.shape[1]
    cdef Py_ssize_t b, t, d, n
    cdef double abar, g, unused1, unused2, acc, xt, dt
    y_arr = np.empty((Bt, L, E))
    cdef double[:, :, ::1] y = y_arr
    cdef double* h = <double*> malloc(N * sizeof(double))
    if h == NULL:
        raise MemoryError()
    try:
        with nogil:
            for b in range(Bt):
                for d in range(E):
                    for n in range(N):
                        h[n] = 0.0
                    for t in range(L):
                        xt = x[b, t, d]
                        dt = delta[b, t, d]
                        acc = 0.0
                        for n in range(N):
                            _zoh(dt, A[d, n], &abar, &g, &unused1, &unused2)
                            h[n] = abar * h[n] + g * B[b, t, n] * xt
                            acc = acc + C[b, t, n] * h[n]
                        y[b, t, d] = acc + D[d] * xt
    finally:
        free(h)
    return y_arr
