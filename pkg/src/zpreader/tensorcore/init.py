"""Deterministic parameter initializers.

All randomness flows through an explicitly seeded ``numpy.random.Generator``
(PCG64); there is no global RNG state anywhere in the package.
"""

import numpy as np

from .core import Tensor, parameter


def orthogonal_init(rows: int, cols: int, rng: np.random.Generator,
                    dtype=np.float64) -> Tensor:
    """Q factor of a standard-normal draw, sign-corrected so the result
    is unique given the draw."""
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    q = q * d
    if rows < cols:
        q = q.T
    return parameter(np.ascontiguousarray(q[:rows, :cols], dtype=dtype))


def uniform_init(shape, lo: float, hi: float, rng: np.random.Generator,
                 dtype=np.float64) -> Tensor:
    if not lo < hi:
        raise ValueError(f"uniform_init: need lo < hi, got [{lo}, {hi}]")
    return parameter(rng.uniform(lo, hi, size=shape).astype(dtype))


def zeros_init(shape, dtype=np.float64) -> Tensor:
    return parameter(np.zeros(shape, dtype=dtype))
