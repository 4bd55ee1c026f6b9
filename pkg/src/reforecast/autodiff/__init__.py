"""Minimal reverse-mode autodiff engine (float64, define-by-run tape)."""

from .gradcheck import grad_check
from .ops import LOG_2PI, dropout, lowrank_gaussian_nll, lstm_cell
from .optim import Adam, adam_step, clone_params
from .tensor import (
    Tape,
    Tensor,
    active_tape,
    add,
    as_tensor,
    backward,
    broadcast_to,
    concat,
    div,
    exp,
    log,
    matmul,
    mul,
    neg,
    parameter,
    reshape,
    sigmoid,
    softplus,
    sub,
    take,
    tanh,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "Adam", "LOG_2PI", "Tape", "Tensor", "active_tape", "adam_step", "add",
    "as_tensor", "backward", "broadcast_to", "clone_params", "concat", "div",
    "dropout", "exp", "grad_check", "log", "lowrank_gaussian_nll", "lstm_cell",
    "matmul", "mul", "neg", "parameter", "reshape", "sigmoid", "softplus",
    "sub", "take", "tanh", "tmean", "transpose", "tsum",
]
