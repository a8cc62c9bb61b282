"""Minimal reverse-mode autodiff over dense float64 tensors."""

from .gradcheck import finite_difference_check
from .graph import (
    Node,
    add,
    add_n,
    apply_mask,
    as_tensor,
    backward,
    concat,
    constant,
    cross_entropy_rows,
    div,
    gather_rows,
    log,
    lstm_sequence,
    matmul,
    max_reduce,
    min_reduce,
    mul,
    negate,
    parameter,
    reduce_mean,
    reduce_sum,
    scale,
    sigmoid,
    softmax,
    square,
    stack_rows,
    take,
    tanh,
    topo_order,
)
from .kernels import BACKEND

__all__ = [
    "Node", "add", "add_n", "apply_mask", "as_tensor", "backward", "concat",
    "constant", "cross_entropy_rows", "div", "gather_rows", "log",
    "lstm_sequence", "matmul", "max_reduce", "min_reduce", "mul", "negate",
    "parameter", "reduce_mean", "reduce_sum", "scale", "sigmoid", "softmax",
    "square", "stack_rows", "take", "tanh", "topo_order",
    "finite_difference_check", "BACKEND",
]
