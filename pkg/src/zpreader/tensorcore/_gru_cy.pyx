# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled GRU sequence kernels.

Same contract as ``_gru_py``: the caller precomputes the input
projections; these kernels run the recurrence and its adjoint with BLAS
matrix-vector products (the arrays are C-ordered, so the Fortran view of
U is its transpose and ``h @ U`` is a plain 'N' gemv).
"""

import numpy as np

cimport numpy as cnp
from cython cimport floating
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemv, dger, sgemv, sger

cnp.import_array()

BACKEND_NAME = "cython"


cdef inline floating _sigmoid(floating x) noexcept nogil:
    cdef floating e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline void _gemv(bint trans, int h, floating* a, floating* x,
                       floating beta, floating* y) noexcept nogil:
    # A is a C-ordered (h, h) matrix, so BLAS sees its transpose:
    # trans=False computes y = x @ A + beta*y, trans=True y = A @ x + beta*y.
    cdef char t = b'T' if trans else b'N'
    cdef int inc = 1
    cdef floating alpha = 1.0
    if floating is double:
        dgemv(&t, &h, &h, &alpha, a, &h, x, &inc, &beta, y, &inc)
    else:
        sgemv(&t, &h, &h, &alpha, a, &h, x, &inc, &beta, y, &inc)


cdef inline void _rank1(int h, floating* x, floating* y, floating* a) noexcept nogil:
    # a[p, q] += y[p] * x[q] for a C-ordered (h, h) matrix.
    cdef int inc = 1
    cdef floating alpha = 1.0
    if floating is double:
        dger(&h, &h, &alpha, x, &inc, y, &inc, a, &h)
    else:
        sger(&h, &h, &alpha, x, &inc, y, &inc, a, &h)


def gru_forward(floating[:, ::1] xz, floating[:, ::1] xr, floating[:, ::1] xh,
                floating[:, ::1] uz, floating[:, ::1] ur, floating[:, ::1] uc):
    cdef int T = xz.shape[0]
    cdef int H = xz.shape[1]
    dtype = np.float64 if floating is double else np.float32
    hs_arr = np.empty((T, H), dtype=dtype)
    zs_arr = np.empty((T, H), dtype=dtype)
    rs_arr = np.empty((T, H), dtype=dtype)
    cs_arr = np.empty((T, H), dtype=dtype)
    work = np.zeros((4, H), dtype=dtype)
    cdef floating[:, ::1] hs = hs_arr
    cdef floating[:, ::1] zs = zs_arr
    cdef floating[:, ::1] rs = rs_arr
    cdef floating[:, ::1] cs = cs_arr
    cdef floating[:, ::1] w = work
    cdef floating* h = &w[0, 0]
    cdef floating* az = &w[1, 0]
    cdef floating* ar = &w[2, 0]
    cdef floating* ac = &w[3, 0]
    cdef int t, i
    cdef floating z
    with nogil:
        for t in range(T):
            for i in range(H):
                az[i] = xz[t, i]
                ar[i] = xr[t, i]
                ac[i] = xh[t, i]
            _gemv(False, H, &uz[0, 0], h, <floating>1.0, az)
            _gemv(False, H, &ur[0, 0], h, <floating>1.0, ar)
            for i in range(H):
                zs[t, i] = _sigmoid(az[i])
                rs[t, i] = _sigmoid(ar[i])
                ar[i] = rs[t, i] * h[i]          # reuse the ar row as r*h
            _gemv(False, H, &uc[0, 0], ar, <floating>1.0, ac)
            for i in range(H):
                cs[t, i] = tanh(ac[i])
                z = zs[t, i]
                h[i] = (1.0 - z) * h[i] + z * cs[t, i]
                hs[t, i] = h[i]
    return hs_arr, zs_arr, rs_arr, cs_arr


def gru_backward(floating[:, ::1] dh_seq, floating[:, ::1] hs,
                 floating[:, ::1] zs, floating[:, ::1] rs, floating[:, ::1] cs,
                 floating[:, ::1] uz, floating[:, ::1] ur, floating[:, ::1] uc):
    cdef int T = dh_seq.shape[0]
    cdef int H = dh_seq.shape[1]
    dtype = np.float64 if floating is double else np.float32
    dxz_arr = np.empty((T, H), dtype=dtype)
    dxr_arr = np.empty((T, H), dtype=dtype)
    dxh_arr = np.empty((T, H), dtype=dtype)
    duz_arr = np.zeros((H, H), dtype=dtype)
    dur_arr = np.zeros((H, H), dtype=dtype)
    duc_arr = np.zeros((H, H), dtype=dtype)
    work = np.zeros((5, H), dtype=dtype)
    cdef floating[:, ::1] dxz = dxz_arr
    cdef floating[:, ::1] dxr = dxr_arr
    cdef floating[:, ::1] dxh = dxh_arr
    cdef floating[:, ::1] duz = duz_arr
    cdef floating[:, ::1] dur = dur_arr
    cdef floating[:, ::1] duc = duc_arr
    cdef floating[:, ::1] w = work
    cdef floating* dh = &w[0, 0]
    cdef floating* d_rh = &w[1, 0]
    cdef floating* dh_prev = &w[2, 0]
    cdef floating* hp = &w[3, 0]
    cdef floating* rh = &w[4, 0]
    cdef int t, i
    cdef floating z, r, c, dz
    with nogil:
        for t in range(T - 1, -1, -1):
            for i in range(H):
                dh[i] += dh_seq[t, i]
                hp[i] = hs[t - 1, i] if t > 0 else 0.0
            for i in range(H):
                z = zs[t, i]
                c = cs[t, i]
                dxh[t, i] = dh[i] * z * (1.0 - c * c)
                dz = dh[i] * (c - hp[i])
                dxz[t, i] = dz * z * (1.0 - z)
                dh_prev[i] = dh[i] * (1.0 - z)
            _gemv(True, H, &uc[0, 0], &dxh[t, 0], <floating>0.0, d_rh)
            for i in range(H):
                r = rs[t, i]
                dxr[t, i] = d_rh[i] * hp[i] * r * (1.0 - r)
                dh_prev[i] += d_rh[i] * r
                rh[i] = r * hp[i]
            _gemv(True, H, &uz[0, 0], &dxz[t, 0], <floating>1.0, dh_prev)
            _gemv(True, H, &ur[0, 0], &dxr[t, 0], <floating>1.0, dh_prev)
            if t > 0:
                _rank1(H, &dxz[t, 0], hp, &duz[0, 0])
                _rank1(H, &dxr[t, 0], hp, &dur[0, 0])
                _rank1(H, &dxh[t, 0], rh, &duc[0, 0])
            for i in range(H):
                dh[i] = dh_prev[i]
    return dxz_arr, dxr_arr, dxh_arr, duz_arr, dur_arr, duc_arr
