"""Pure NumPy GRU sequence kernels (fallback backend).

Both backends share one contract.  The input projections
``x_t @ W_gate + b_gate`` are precomputed outside the kernel as three
(T, H) arrays; the kernel runs only the recurrence

    z_t = sigmoid(xz_t + h_{t-1} @ Uz)
    r_t = sigmoid(xr_t + h_{t-1} @ Ur)
    c_t = tanh(xh_t + (r_t * h_{t-1}) @ Uc)
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t

from h_0 = 0, and its exact adjoint.  ``forward`` returns the state
sequence plus the gate activations the backward pass needs.
"""

import numpy as np

BACKEND_NAME = "pure"


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gru_forward(xz, xr, xh, uz, ur, uc):
    T, H = xz.shape
    hs = np.empty((T, H), dtype=xz.dtype)
    zs = np.empty((T, H), dtype=xz.dtype)
    rs = np.empty((T, H), dtype=xz.dtype)
    cs = np.empty((T, H), dtype=xz.dtype)
    h = np.zeros(H, dtype=xz.dtype)
    for t in range(T):
        z = _sigmoid(xz[t] + h @ uz)
        r = _sigmoid(xr[t] + h @ ur)
        c = np.tanh(xh[t] + (r * h) @ uc)
        h = (1.0 - z) * h + z * c
        zs[t] = z
        rs[t] = r
        cs[t] = c
        hs[t] = h
    return hs, zs, rs, cs


def gru_backward(dh_seq, hs, zs, rs, cs, uz, ur, uc):
    T, H = dh_seq.shape
    dtype = dh_seq.dtype
    dxz = np.empty((T, H), dtype=dtype)
    dxr = np.empty((T, H), dtype=dtype)
    dxh = np.empty((T, H), dtype=dtype)
    duz = np.zeros((H, H), dtype=dtype)
    dur = np.zeros((H, H), dtype=dtype)
    duc = np.zeros((H, H), dtype=dtype)
    dh = np.zeros(H, dtype=dtype)
    for t in range(T - 1, -1, -1):
        dh = dh + dh_seq[t]
        h_prev = hs[t - 1] if t > 0 else np.zeros(H, dtype=dtype)
        z, r, c = zs[t], rs[t], cs[t]
        dz = dh * (c - h_prev)
        da_z = dz * z * (1.0 - z)
        da_c = dh * z * (1.0 - c * c)
        d_rh = uc @ da_c
        da_r = d_rh * h_prev * r * (1.0 - r)
        dh_prev = dh * (1.0 - z) + d_rh * r + uz @ da_z + ur @ da_r
        duz += np.outer(h_prev, da_z)
        dur += np.outer(h_prev, da_r)
        duc += np.outer(r * h_prev, da_c)
        dxz[t] = da_z
        dxr[t] = da_r
        dxh[t] = da_c
        dh = dh_prev
    return dxz, dxr, dxh, duz, dur, duc
