"""Minimal dense tensor type with reverse-mode gradient accumulation.

Operations execute eagerly on NumPy arrays.  While a :class:`Tape` is
active (as a context manager), every op whose inputs carry gradients
records an adjoint closure; ``Tape.backward`` replays the closures in
reverse execution order, accumulating into each tensor's ``grad``
buffer.  Tensors are float64 by default; float32 can be selected for
training throughput.
"""

import threading

import numpy as np

from ..errors import NonFiniteError, ShapeError

_state = threading.local()


def _tape_stack():
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = _state.stack = []
    return stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float64, np.float32):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def ensure_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def accumulate_grad(self, g):
        self.ensure_grad()
        self.grad += g

    def zero_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name})"


def parameter(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype)


class Tape:
    """Ordered record of executed ops; replays adjoints on ``backward``."""

    def __init__(self):
        self._records = []
        self._outputs = set()
        self._consumed = False

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self
        return False

    def record(self, out: Tensor, adjoint) -> None:
        out.requires_grad = True
        self._records.append((out, adjoint))
        self._outputs.add(id(out))

    def backward(self, loss: Tensor) -> None:
        """Populate ``grad`` buffers for every tensor reaching ``loss``."""
        if self._consumed:
            raise RuntimeError("tape already consumed by a previous backward")
        if not self._records or id(loss) not in self._outputs:
            raise RuntimeError("backward called on a loss this tape did not produce")
        if loss.shape != ():
            raise ShapeError(f"loss must be scalar, got shape {loss.shape}")
        self._consumed = True
        loss.grad = np.ones_like(loss.data)
        for out, adjoint in reversed(self._records):
            if out.grad is not None:
                adjoint(out.grad)
        # Release intermediates; parameter grads stay on the tensors.
        self._records.clear()
        self._outputs.clear()


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


class no_grad:
    """Context manager suppressing recording (inference mode)."""

    def __enter__(self):
        _tape_stack().append(None)
        return self

    def __exit__(self, exc_type, exc, tb):
        _tape_stack().pop()
        return False


def _check_finite(arr, op_name):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{op_name} produced a non-finite value")
    return arr


def _make(data, op_name, inputs, adjoint):
    out = Tensor(_check_finite(data, op_name))
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(out, adjoint)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for 2D@2D, 2D@1D and 1D@2D operands."""
    sa, sb = a.shape, b.shape
    ok = ((len(sa), len(sb)) in ((2, 2), (2, 1), (1, 2))
          and sa[-1 if len(sa) == 2 else 0] == sb[0])
    if not ok:
        raise ShapeError(f"matmul: incompatible shapes {sa} and {sb}")
    data = a.data @ b.data

    def adjoint(g):
        if len(sa) == 2 and len(sb) == 2:
            if a.requires_grad:
                a.accumulate_grad(g @ b.data.T)
            if b.requires_grad:
                b.accumulate_grad(a.data.T @ g)
        elif len(sb) == 1:          # (m,k) @ (k,) -> (m,)
            if a.requires_grad:
                a.accumulate_grad(np.outer(g, b.data))
            if b.requires_grad:
                b.accumulate_grad(a.data.T @ g)
        else:                       # (k,) @ (k,n) -> (n,)
            if a.requires_grad:
                a.accumulate_grad(b.data @ g)
            if b.requires_grad:
                b.accumulate_grad(np.outer(a.data, g))

    return _make(data, "matmul", (a, b), adjoint)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; a 1-D operand may broadcast over the rows of a
    2-D operand."""
    sa, sb = a.shape, b.shape
    if sa != sb and not (len(sa) == 2 and sb == (sa[1],)) \
            and not (len(sb) == 2 and sa == (sb[1],)):
        raise ShapeError(f"add: incompatible shapes {sa} and {sb}")
    data = a.data + b.data

    def reduce_to(shape, g):
        return g.sum(axis=0) if shape != g.shape else g

    def adjoint(g):
        if a.requires_grad:
            a.accumulate_grad(reduce_to(sa, g))
        if b.requires_grad:
            b.accumulate_grad(reduce_to(sb, g))

    return _make(data, "add", (a, b), adjoint)


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"elementwise_mul: incompatible shapes {a.shape} and {b.shape}")
    data = a.data * b.data

    def adjoint(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return _make(data, "elementwise_mul", (a, b), adjoint)


def tanh(x: Tensor) -> Tensor:
    data = np.tanh(x.data)

    def adjoint(g):
        if x.requires_grad:
            x.accumulate_grad(g * (1.0 - data * data))

    return _make(data, "tanh", (x,), adjoint)


def sigmoid(x: Tensor) -> Tensor:
    data = sigmoid_array(x.data)

    def adjoint(g):
        if x.requires_grad:
            x.accumulate_grad(g * data * (1.0 - data))

    return _make(data, "sigmoid", (x,), adjoint)


def sigmoid_array(x):
    # Evaluated piecewise so exp never overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: Tensor) -> Tensor:
    """Shift-normalized softmax over a 1-D tensor."""
    if len(x.shape) != 1:
        raise ShapeError(f"softmax expects a 1-D tensor, got shape {x.shape}")
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    data = e / e.sum()

    def adjoint(g):
        if x.requires_grad:
            x.accumulate_grad(data * (g - np.dot(g, data)))

    return _make(data, "softmax", (x,), adjoint)


def concat(parts, axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    shapes = [p.shape for p in parts]
    ndim = len(shapes[0])
    if any(len(s) != ndim for s in shapes) or not 0 <= axis < ndim:
        raise ShapeError(f"concat: incompatible shapes {shapes} on axis {axis}")
    for d in range(ndim):
        if d != axis and len({s[d] for s in shapes}) != 1:
            raise ShapeError(f"concat: incompatible shapes {shapes} on axis {axis}")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [s[axis] for s in shapes]

    def adjoint(g):
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                index = [slice(None)] * ndim
                index[axis] = slice(offset, offset + size)
                p.accumulate_grad(g[tuple(index)])
            offset += size

    return _make(data, "concat", tuple(parts), adjoint)


def mean_over_axis(x: Tensor, axis: int = 0) -> Tensor:
    if not 0 <= axis < len(x.shape):
        raise ShapeError(f"mean_over_axis: axis {axis} invalid for shape {x.shape}")
    n = x.shape[axis]
    data = x.data.mean(axis=axis)

    def adjoint(g):
        if x.requires_grad:
            x.accumulate_grad(np.repeat(np.expand_dims(g / n, axis), n, axis=axis))

    return _make(data, "mean_over_axis", (x,), adjoint)


def take_rows(mat: Tensor, ids) -> Tensor:
    """Gather rows of an embedding matrix (one-hot product realized as
    indexing)."""
    ids = np.asarray(ids, dtype=np.int64)
    if len(mat.shape) != 2 or ids.ndim != 1:
        raise ShapeError(f"take_rows: need 2-D matrix and 1-D ids, "
                         f"got {mat.shape} and {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= mat.shape[0]):
        raise ShapeError(f"take_rows: id out of range for {mat.shape[0]} rows")
    data = mat.data[ids]

    def adjoint(g):
        if mat.requires_grad:
            buf = mat.ensure_grad()
            np.add.at(buf, ids, g)

    return _make(data, "take_rows", (mat,), adjoint)


def pick(vec: Tensor, index: int) -> Tensor:
    if len(vec.shape) != 1:
        raise ShapeError(f"pick expects a 1-D tensor, got shape {vec.shape}")
    if not 0 <= index < vec.shape[0]:
        raise ShapeError(f"pick: index {index} out of range for length {vec.shape[0]}")
    data = vec.data[index].copy()

    def adjoint(g):
        if vec.requires_grad:
            buf = vec.ensure_grad()
            buf[index] += g

    return _make(data, "pick", (vec,), adjoint)


def neg_log(x: Tensor) -> Tensor:
    if x.shape != ():
        raise ShapeError(f"neg_log expects a scalar, got shape {x.shape}")
    data = -np.log(x.data)

    def adjoint(g):
        if x.requires_grad:
            x.accumulate_grad(-g / x.data)

    return _make(data, "neg_log", (x,), adjoint)


def flip0(x: Tensor) -> Tensor:
    """Reverse along the first axis (used for the backward encoder)."""
    data = x.data[::-1].copy()

    def adjoint(g):
        if x.requires_grad:
            x.accumulate_grad(g[::-1])

    return _make(data, "flip0", (x,), adjoint)
