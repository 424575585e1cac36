"""Parameterised layers with named, ordered parameters."""

from __future__ import annotations

from collections import OrderedDict
from typing import Dict, Iterator, Tuple

import numpy as np

from . import functional as F
from .tensor import Tensor, default_dtype


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(default_dtype())


class Module:
    """Container tracking parameters and child modules in definition order."""

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_children", OrderedDict())
        object.__setattr__(self, "frozen", False)

    def __setattr__(self, key, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[key] = value
        elif isinstance(value, Module):
            self._children[key] = value
        object.__setattr__(self, key, value)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(prefix + name + ".")

    def parameters(self, trainable_only: bool = False):
        out = []
        for name, module, p in self._walk():
            if trainable_only and module.frozen:
                continue
            out.append(p)
        return out

    def _walk(self, prefix: str = ""):
        for name, p in self._params.items():
            yield prefix + name, self, p
        for name, child in self._children.items():
            for item in child._walk(prefix + name + "."):
                yield item

    def freeze(self, flag: bool = True) -> "Module":
        self.frozen = flag
        for child in self._children.values():
            child.freeze(flag)
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        missing = [k for k in own if k not in state]
        unexpected = [k for k in state if k not in own]
        if strict and (missing or unexpected):
            raise KeyError(f"state mismatch: missing {missing[:5]}, unexpected {unexpected[:5]}")
        for name, p in own.items():
            if name not in state:
                continue
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: expected shape {p.shape}, got {arr.shape}")
            p.data = arr.astype(p.data.dtype, copy=True)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _param(arr) -> Tensor:
    return Tensor(arr, requires_grad=True)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = _param(uniform_init(rng, (d_in, d_out), d_in))
        self.bias = _param(uniform_init(rng, (d_out,), d_in)) if bias else None

    def forward(self, x) -> Tensor:
        return F.linear(x, self.weight, self.bias)

    def zero_(self) -> "Linear":
        self.weight.data[...] = 0.0
        if self.bias is not None:
            self.bias.data[...] = 0.0
        return self


class Conv1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel_size: int, dilation: int, rng: np.random.Generator):
        super().__init__()
        if kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if dilation < 1:
            raise ValueError("dilation must be >= 1")
        self.kernel_size, self.dilation = kernel_size, dilation
        fan_in = c_in * kernel_size
        self.weight = _param(uniform_init(rng, (c_out, c_in, kernel_size), fan_in))
        self.bias = _param(uniform_init(rng, (c_out,), fan_in))

    def forward(self, x) -> Tensor:
        return F.conv1d_dilated(x, self.weight, self.bias, self.dilation)


class PartialConv1d(Conv1d):
    def forward(self, x, mask):
        return F.partial_conv1d(x, mask, self.weight, self.bias, self.dilation)


class CrossAttention(Module):
    """Projections for one direction of stream fusion (queries from the other stream)."""

    def __init__(self, d_own: int, d_other: int, d_k: int, rng: np.random.Generator,
                 residual: str = "value"):
        super().__init__()
        if d_k <= 0:
            raise ValueError("d_k must be positive")
        self.d_k, self.residual = d_k, residual
        self.w_q = _param(uniform_init(rng, (d_other, d_k), d_other))
        self.w_k = _param(uniform_init(rng, (d_own, d_k), d_own))
        self.w_v = _param(uniform_init(rng, (d_own, d_k), d_own))

    def forward(self, own, other, return_weights: bool = False):
        return F.cross_attention(own, other, self.w_q, self.w_k, self.w_v, self.residual, return_weights)
