from .tape import (
    ShapeError,
    Tape,
    Value,
    add,
    add_n,
    asum,
    concat,
    embed,
    lstm_cell,
    matmul,
    maxpool,
    mul,
    scale,
    sigmoid,
    softmax_xent,
    tanh,
    vslice,
)
from .gradcheck import grad_check, grad_check_named
from .optim import ParamSet, adam_step, clip_gradients
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ShapeError", "Tape", "Value",
    "add", "add_n", "asum", "concat", "embed", "lstm_cell", "matmul",
    "maxpool", "mul", "scale", "sigmoid", "softmax_xent", "tanh", "vslice",
    "grad_check", "grad_check_named",
    "ParamSet", "adam_step", "clip_gradients",
    "load_checkpoint", "save_checkpoint",
]
