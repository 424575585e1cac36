"""Built-in gradient checks for the tensor ops and layers."""

from __future__ import annotations

import numpy as np

from . import functional as F
from . import tensor as T
from .gradcheck import register


def _away_from_zero(rng, shape, lo=0.1, hi=1.0):
    return rng.uniform(lo, hi, shape) * rng.choice([-1.0, 1.0], shape)


@register("dense")
def _dense(rng):
    return (lambda x, w, b: F.linear(x, w, b)), [rng.normal(size=(5, 4)), rng.normal(size=(4, 3)),
                                                 rng.normal(size=3)]


@register("conv1d_dilated")
def _conv(rng):
    dil = int(rng.integers(1, 4))
    return (lambda x, w, b: F.conv1d_dilated(x, w, b, dil)), [
        rng.normal(size=(2, 3, 12)), rng.normal(size=(4, 3, 3)), rng.normal(size=4)]


@register("partial_conv1d")
def _pconv(rng):
    mask = rng.random((2, 3, 12)) > 0.4
    mask[0, :, 4:9] = False
    return (lambda x, w, b: F.partial_conv1d(x, mask, w, b, 2)[0]), [
        rng.normal(size=(2, 3, 12)), rng.normal(size=(4, 3, 3)), rng.normal(size=4)]


@register("cross_attention")
def _xattn(rng):
    return (lambda a, b, wq, wk, wv: F.cross_attention(a, b, wq, wk, wv)), [
        rng.normal(size=(5, 4)), rng.normal(size=(5, 6)), rng.normal(size=(6, 3)),
        rng.normal(size=(4, 3)), rng.normal(size=(4, 3))]


@register("cross_attention_query_residual")
def _xattn_q(rng):
    return (lambda a, b, wq, wk, wv: F.cross_attention(a, b, wq, wk, wv, residual="query")), [
        rng.normal(size=(5, 4)), rng.normal(size=(5, 3)), rng.normal(size=(3, 3)),
        rng.normal(size=(4, 3)), rng.normal(size=(4, 3))]


@register("softmax")
def _softmax(rng):
    return (lambda x: T.softmax(x, axis=-1)), [rng.normal(size=(3, 5))]


@register("matmul_broadcast")
def _matmul(rng):
    return (lambda a, b: T.matmul(a, b)), [rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 2))]


@register("elementwise")
def _elementwise(rng):
    def fn(x, y):
        return (T.exp(x) * T.tanh(y) + T.sigmoid(x - y) + T.log(T.absolute(y)) + T.sqrt(x * x + 1.0)
                + T.relu(y) / (x * x + 1.0) + T.power(x * x + 0.5, 1.5))
    return fn, [_away_from_zero(rng, (4, 3)), _away_from_zero(rng, (4, 3))]


@register("reductions")
def _reductions(rng):
    def fn(x):
        return T.concat([T.mean(x, axis=0), T.tsum(x, axis=1).reshape(-1)[:3], x[1, ::2]], axis=0)
    return fn, [rng.normal(size=(4, 5))]


@register("stack_transpose")
def _stack(rng):
    return (lambda a, b: T.stack([a, b.transpose(1, 0)], axis=1)), [rng.normal(size=(3, 4)),
                                                                   rng.normal(size=(4, 3))]


@register("axis_angle_to_matrix")
def _rodrigues(rng):
    aa = rng.normal(size=(4, 3))
    aa[0] *= 1e-4          # exercises the series branch
    return F.axis_angle_to_matrix, [aa]


@register("rot6d_to_matrix")
def _rot6d(rng):
    return F.rot6d_to_matrix, [rng.normal(size=(3, 6))]


@register("projection")
def _projection(rng):
    pts = rng.normal(size=(6, 3)) * 0.3 + np.array([0.0, 0.0, 3.0])

    def fn(p, r6, t):
        return F.project_normalized(p, F.rot6d_to_matrix(r6), t)[0]
    eye6 = np.array([1.0, 0, 0, 0, 1.0, 0]) + 0.05 * rng.normal(size=6)
    return fn, [pts, eye6, 0.1 * rng.normal(size=3)]


@register("binary_cross_entropy")
def _bce(rng):
    target = rng.uniform(size=6)
    return (lambda p: F.binary_cross_entropy(p, target)), [rng.uniform(0.1, 0.9, size=6)]


@register("norm")
def _norm(rng):
    return (lambda x: T.norm(x, axis=-1)), [rng.normal(size=(4, 3))]
