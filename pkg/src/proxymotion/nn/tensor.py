"""Dense tensors with tape-free reverse-mode differentiation.

Every differentiable operation returns a new :class:`Tensor` that remembers
its parents and a closure mapping the output gradient to parent gradients.
:meth:`Tensor.backward` walks that graph once in reverse topological order
and releases it afterwards.
"""

from __future__ import annotations

import contextlib
import threading

import numpy as np

_state = threading.local()


def default_dtype():
    return getattr(_state, "dtype", np.float64)


def set_default_dtype(dtype) -> None:
    """Select float64 (default) or float32 for newly created tensors."""
    dtype = np.dtype(dtype).type
    if dtype not in (np.float64, np.float32):
        raise ValueError("only float64 and float32 are supported")
    _state.dtype = dtype


def grad_enabled() -> bool:
    return getattr(_state, "grad", True)


@contextlib.contextmanager
def no_grad():
    prev = grad_enabled()
    _state.grad = False
    try:
        yield
    finally:
        _state.grad = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str = None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype or default_dtype())
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _make(cls, data, parents, backward):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        track = grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- differentiation ------------------------------------------------------
    def backward(self, grad=None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf's ``grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError(f"backward() needs a scalar output, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            raise ValueError("output does not depend on any tensor with requires_grad=True")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg
            node._parents = ()
            node._backward = None

    # -- operators ------------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def swapaxes(self, a, b):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))

    @property
    def T(self):
        return self.swapaxes(-1, -2)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise arithmetic ---------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(a.data + b.data, (a, b),
                        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(a.data - b.data, (a, b),
                        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(a.data * b.data, (a, b),
                        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return Tensor._make(out, (a, b),
                        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(-a.data, (a,), lambda g: (-g,))


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(a.data ** exponent, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor._make(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return Tensor._make(out, (a,), lambda g: (0.5 * g / out,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor._make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return Tensor._make(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return Tensor._make(np.where(pos, a.data, 0.0).astype(a.data.dtype), (a,), lambda g: (g * pos,))


def norm(a, axis: int = -1) -> Tensor:
    """Euclidean norm along `axis`; the gradient at a zero vector is taken as 0."""
    a = as_tensor(a)
    out = np.sqrt(np.sum(a.data * a.data, axis=axis))

    def back(g):
        safe = np.where(out > 0, out, 1.0)
        scale = np.where(out > 0, g / safe, 0.0)
        return (a.data * np.expand_dims(scale, axis),)

    return Tensor._make(out, (a,), back)


def absolute(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clamp_min(a, lo: float) -> Tensor:
    a = as_tensor(a)
    keep = a.data > lo
    return Tensor._make(np.where(keep, a.data, lo).astype(a.data.dtype), (a,), lambda g: (g * keep,))


def where_const(cond, a, fill: float = 0.0) -> Tensor:
    """``a`` where `cond` holds, the constant `fill` elsewhere (no NaN leakage)."""
    a = as_tensor(a)
    cond = np.asarray(cond, dtype=bool)
    out = np.where(cond, a.data, fill).astype(a.data.dtype)
    return Tensor._make(out, (a,), lambda g: (_unbroadcast(np.where(cond, g, 0.0), a.shape),))


# -- reductions and shape ------------------------------------------------------
def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor._make(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), back)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / n)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return Tensor._make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def _is_basic(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is Ellipsis or i is None for i in items)


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    basic = _is_basic(index)

    def back(g):
        out = np.zeros_like(a.data)
        if basic:
            out[index] += g
        else:
            np.add.at(out, index, g)
        return (out,)

    return Tensor._make(a.data[index], (a,), back)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tensors,
                        lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._make(np.stack([t.data for t in tensors], axis=axis), tensors, back)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor._make(a.data @ b.data, (a, b), back)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor._make(out, (a,), back)


# -- rotation helpers ------------------------------------------------------------
_SERIES = 1e-2


def _sinc_coeffs(s: np.ndarray):
    """A = sin(r)/r and B = (1 - cos r)/r^2 with r = sqrt(s), plus dA/ds, dB/ds."""
    small = s < _SERIES
    ss = np.where(small, 1.0, s)
    r = np.sqrt(ss)
    sin, cos = np.sin(r), np.cos(r)
    A = np.where(small, 1 - s / 6 + s ** 2 / 120 - s ** 3 / 5040 + s ** 4 / 362880, sin / r)
    B = np.where(small, 0.5 - s / 24 + s ** 2 / 720 - s ** 3 / 40320 + s ** 4 / 3628800, (1 - cos) / ss)
    dA = np.where(small, -1 / 6 + s / 60 - s ** 2 / 1680 + s ** 3 / 90720,
                  (r * cos - sin) / (2 * ss * r))
    dB = np.where(small, -1 / 24 + s / 360 - s ** 2 / 13440 + s ** 3 / 907200,
                  (r * sin - 2 + 2 * cos) / (2 * ss * ss))
    return A, B, dA, dB


def rodrigues_coefficients(s) -> tuple:
    """Differentiable (A(s), B(s)) for squared rotation angles s."""
    s = as_tensor(s)
    A, B, dA, dB = _sinc_coeffs(s.data)
    return (Tensor._make(A.astype(s.data.dtype), (s,), lambda g: (g * dA,)),
            Tensor._make(B.astype(s.data.dtype), (s,), lambda g: (g * dB,)))
