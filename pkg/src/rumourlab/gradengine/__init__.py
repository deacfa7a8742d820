"""Reverse-mode gradient engine: tensors, losses, optimizers, checks."""

from .checkpoint import CKPT_FORMAT_VERSION, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .losses import bce_loss, hinge_loss, weighted_ce_loss
from .optim import OptimizerState, optimizer_step
from .sparse import SparseMatrix
from .tensor import (
    Tensor,
    add,
    backward,
    collect_grads,
    concat,
    gather_rows,
    mask_mul,
    matmul,
    mean_all,
    mul,
    parameter,
    relu,
    segment_mean,
    sigmoid,
    softmax_rows,
    spmm,
    sum_all,
    tanh,
    zero_grads,
)

__all__ = [
    "CKPT_FORMAT_VERSION", "OptimizerState", "SparseMatrix", "Tensor",
    "add", "backward", "bce_loss", "collect_grads", "concat", "gather_rows",
    "grad_check", "hinge_loss", "load_checkpoint", "mask_mul", "matmul",
    "mean_all", "mul", "optimizer_step", "parameter", "relu", "save_checkpoint",
    "segment_mean", "sigmoid", "softmax_rows", "spmm", "sum_all", "tanh",
    "weighted_ce_loss", "zero_grads",
]
