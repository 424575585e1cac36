"""Central finite-difference checks for differentiable operations.

Checks are registered by name with a factory that builds random inputs
from a generator. Each check reduces the op output to a scalar with a fixed
random projection so every output entry contributes to the gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np

from .tensor import Tensor, tsum

EPS = 1e-5
TOLERANCE = 1e-4


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    passed: bool
    num_inputs: int


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Normwise relative error ``|a - n|_inf / max(|a|_inf, |n|_inf)``."""
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / scale)


def numeric_gradient(fn: Callable[[], float], arr: np.ndarray, eps: float = EPS) -> np.ndarray:
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = fn()
        flat[i] = old - eps
        fm = fn()
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def check_function(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], eps: float = EPS,
                   seed: int = 0, name: str = "fn", tolerance: float = TOLERANCE) -> CheckResult:
    """Compare backward() against central differences for every input."""
    arrays = [np.array(x, dtype=np.float64, copy=True) for x in inputs]
    probe = fn(*[Tensor(a) for a in arrays]).data
    weights = np.random.default_rng(seed).normal(size=probe.shape)

    def scalar() -> float:
        return float(np.sum(fn(*[Tensor(a) for a in arrays]).data * weights))

    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    loss = tsum(fn(*leaves) * weights)
    loss.backward()
    worst = 0.0
    for leaf, arr in zip(leaves, arrays):
        analytic = np.zeros_like(arr) if leaf.grad is None else leaf.grad
        numeric = numeric_gradient(scalar, arr, eps)
        worst = max(worst, relative_error(analytic, numeric))
    return CheckResult(name, worst, worst < tolerance, len(arrays))


_REGISTRY: Dict[str, Callable[[np.random.Generator], tuple]] = {}


def register(name: str):
    """Decorator: the factory returns ``(fn, inputs)`` for a given generator."""
    def wrap(factory):
        if name in _REGISTRY:
            raise ValueError(f"gradient check {name!r} already registered")
        _REGISTRY[name] = factory
        return factory
    return wrap


def registered() -> List[str]:
    _load_builtin_checks()
    return sorted(_REGISTRY)


def run_suite(names: Sequence[str] = None, seed: int = 0, eps: float = EPS,
              tolerance: float = TOLERANCE, fault: str = None) -> List[CheckResult]:
    """Run registered checks. `fault` names a check whose backward is sabotaged."""
    _load_builtin_checks()
    names = registered() if names is None else list(names)
    out = []
    for i, name in enumerate(names):
        rng = np.random.default_rng([seed, i])
        fn, inputs = _REGISTRY[name](rng)
        if name == fault:
            fn = _sabotage(fn)
        out.append(check_function(fn, inputs, eps, seed + i, name, tolerance))
    return out


def _sabotage(fn):
    """Wrap fn so its gradient is scaled by 1.5 while its value is unchanged."""
    def bad(*args):
        out = fn(*args)

        def back(g):
            return (1.5 * g,)
        return Tensor._make(out.data.copy(), (out,), back)
    return bad


_LOADED = False


def _load_builtin_checks() -> None:
    global _LOADED
    if not _LOADED:
        _LOADED = True
        from . import checks  # noqa: F401  registers on import
        from ..eval import checks as _loss_checks  # noqa: F401
