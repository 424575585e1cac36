"""Small reverse-mode autodiff engine and the layers built on it."""

from .tensor import Tensor, as_tensor, no_grad, set_default_dtype
from .layers import Conv1d, CrossAttention, Linear, Module, PartialConv1d
from .optim import SGD, Adam, make_optimizer
from .weights_io import load_weights, save_weights

__all__ = [
    "Adam", "Conv1d", "CrossAttention", "Linear", "Module", "PartialConv1d", "SGD", "Tensor",
    "as_tensor", "load_weights", "make_optimizer", "no_grad", "save_weights", "set_default_dtype",
]
