"""GRU sequence op: kernel backend dispatch plus tape integration.

The recurrence kernels exist twice — a compiled extension and a pure
NumPy module with the identical contract.  The compiled one is used
when importable; ``ZPREADER_GRU_BACKEND=pure|cython`` forces a choice
(``cython`` raises if the extension is missing rather than silently
degrading).
"""

import os

import numpy as np

from ..errors import ShapeError
from . import _gru_py
from .core import Tensor, _make

_ENV_VAR = "ZPREADER_GRU_BACKEND"


def _load_backend():
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice not in ("", "pure", "cython"):
        raise ValueError(f"{_ENV_VAR} must be 'pure' or 'cython', got {choice!r}")
    if choice == "pure":
        return _gru_py
    try:
        from . import _gru_cy
    except ImportError:
        if choice == "cython":
            raise
        return _gru_py
    return _gru_cy


_backend = _load_backend()
BACKEND = _backend.BACKEND_NAME


def _c(arr):
    return np.ascontiguousarray(arr)


def gru_sequence(xz: Tensor, xr: Tensor, xh: Tensor,
                 uz: Tensor, ur: Tensor, uc: Tensor,
                 kernels=None) -> Tensor:
    """Run the gated recurrence over (T, H) input projections and return
    the (T, H) hidden-state sequence, starting from a zero state.

    The update/reset/candidate input projections are computed by the
    caller (one matmul per gate over the whole sequence); this op owns
    only the sequential part and its exact adjoint.  ``kernels``
    overrides the module-level backend, for parity tests.
    """
    k = kernels if kernels is not None else _backend
    if len(xz.shape) != 2 or xz.shape[0] == 0:
        raise ShapeError(f"gru_sequence: projections must be (T>0, H), got {xz.shape}")
    T, H = xz.shape
    for name, t in (("xr", xr), ("xh", xh)):
        if t.shape != (T, H):
            raise ShapeError(f"gru_sequence: {name} shape {t.shape} != {(T, H)}")
    for name, t in (("uz", uz), ("ur", ur), ("uc", uc)):
        if t.shape != (H, H):
            raise ShapeError(f"gru_sequence: {name} shape {t.shape} != {(H, H)}")
    dtypes = {t.dtype for t in (xz, xr, xh, uz, ur, uc)}
    if len(dtypes) != 1:
        raise ShapeError(f"gru_sequence: mixed dtypes {sorted(d.name for d in dtypes)}")

    hs, zs, rs, cs = k.gru_forward(_c(xz.data), _c(xr.data), _c(xh.data),
                                   _c(uz.data), _c(ur.data), _c(uc.data))

    def adjoint(g):
        dxz, dxr, dxh, duz, dur, duc = k.gru_backward(
            _c(g), hs, zs, rs, cs, _c(uz.data), _c(ur.data), _c(uc.data))
        if xz.requires_grad:
            xz.accumulate_grad(dxz)
        if xr.requires_grad:
            xr.accumulate_grad(dxr)
        if xh.requires_grad:
            xh.accumulate_grad(dxh)
        if uz.requires_grad:
            uz.accumulate_grad(duz)
        if ur.requires_grad:
            ur.accumulate_grad(dur)
        if uc.requires_grad:
            uc.accumulate_grad(duc)

    return _make(hs, "gru_sequence", (xz, xr, xh, uz, ur, uc), adjoint)
