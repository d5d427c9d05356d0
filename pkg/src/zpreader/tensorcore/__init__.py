"""Minimal reverse-mode autodiff core and the GRU sequence kernels."""

from .core import (
    Tape,
    Tensor,
    active_tape,
    add,
    backward,
    concat,
    elementwise_mul,
    flip0,
    matmul,
    mean_over_axis,
    neg_log,
    no_grad,
    parameter,
    pick,
    sigmoid,
    sigmoid_array,
    softmax,
    take_rows,
    tanh,
)
from .gru import BACKEND, gru_sequence
from .init import orthogonal_init, uniform_init, zeros_init

__all__ = [
    "BACKEND",
    "Tape",
    "Tensor",
    "active_tape",
    "add",
    "backward",
    "concat",
    "elementwise_mul",
    "flip0",
    "gru_sequence",
    "matmul",
    "mean_over_axis",
    "neg_log",
    "no_grad",
    "orthogonal_init",
    "parameter",
    "pick",
    "sigmoid",
    "sigmoid_array",
    "softmax",
    "take_rows",
    "tanh",
    "uniform_init",
    "zeros_init",
]
