from .engine import Function, Tape, Tensor, check_graph, enable_grad, grad, is_grad_enabled, no_grad, op_scope
from .functional import (
    AdamState,
    BatchNormState,
    activation,
    adam_step,
    batchnorm2d,
    conv2d,
    conv_transpose2d,
    cross_entropy,
    dropout,
    flatten,
    input_grad_norm,
    linear,
    maxpool2d,
)
from .nn import Module, Parameter

__all__ = [
    "AdamState",
    "BatchNormState",
    "Function",
    "Module",
    "Parameter",
    "Tape",
    "Tensor",
    "activation",
    "adam_step",
    "batchnorm2d",
    "check_graph",
    "conv2d",
    "conv_transpose2d",
    "cross_entropy",
    "dropout",
    "enable_grad",
    "flatten",
    "grad",
    "input_grad_norm",
    "is_grad_enabled",
    "linear",
    "maxpool2d",
    "no_grad",
    "op_scope",
]
