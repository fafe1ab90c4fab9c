"""Minimal reverse-mode differentiable numerics."""
from .nn import (
    GRU_PARAM_NAMES,
    LOG_SIGMA_MAX,
    LOG_SIGMA_MIN,
    affine,
    gaussian_sample,
    gru_cell,
    init_gru,
    init_linear,
)
from .optim import Adam, optimizer_step
from .params import ParamStore
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    bce_loss,
    clamp,
    concat,
    exp,
    gather_rows,
    log,
    log_softmax,
    matmul,
    mean,
    minimum,
    mse,
    mul,
    no_grad,
    relu,
    sigmoid,
    sparse_matmul,
    sub,
    sum,
    take_per_row,
    tanh,
    topological_order,
)

__all__ = [
    "Adam", "GRU_PARAM_NAMES", "LOG_SIGMA_MAX", "LOG_SIGMA_MIN", "ParamStore",
    "Tensor", "add", "affine", "as_tensor", "backward", "bce_loss", "clamp",
    "concat", "exp", "gather_rows", "gaussian_sample", "gru_cell", "init_gru",
    "init_linear", "log", "log_softmax", "matmul", "mean", "minimum", "mse", "mul",
    "no_grad", "optimizer_step", "relu", "sigmoid", "sparse_matmul", "sub",
    "sum", "take_per_row", "tanh", "topological_order",
]
