"""Gradient checks for every loss term."""

from __future__ import annotations

import numpy as np

from ..nn.gradcheck import register
from . import losses as L

_V, _K, _J = 2, 3, 5


def _pair(rng, shape):
    return rng.normal(size=shape), rng.normal(size=shape)


@register("loss_mpjpe")
def _mpjpe(rng):
    pred, gt = _pair(rng, (4, _J, 3))
    return (lambda p: L.mpjpe(p, gt)), [pred]


@register("loss_l1")
def _l1(rng):
    pred, gt = _pair(rng, (4, 6))
    return (lambda p: L.l1(p, gt)), [pred]


@register("loss_mse")
def _mse(rng):
    pred, gt = _pair(rng, (4, 22, 3))
    return (lambda p: L.mse(p, gt)), [pred]


@register("loss_consist")
def _consist(rng):
    return (lambda th, t: L.consistency(th, t, _V, _K)), [rng.normal(size=(_V * _K, 22, 3)),
                                                          rng.normal(size=(_V * _K, 3))]


@register("loss_smooth")
def _smooth(rng):
    gt = rng.normal(size=(_V * _K, _J, 3))
    return (lambda j: L.smoothness(j, gt, _V, _K)), [rng.normal(size=(_V * _K, _J, 3))]


@register("loss_contact")
def _contact(rng):
    prev = rng.normal(size=(4, 4, 3))
    ind = rng.uniform(size=(4, 4))
    ids = (0, 1, 2, 3)
    return (lambda j: L.contact_loss(j, prev, ind, ids, 60.0)), [rng.normal(size=(4, _J, 3))]


@register("loss_ind")
def _ind(rng):
    gt = rng.uniform(size=(4, 4))
    return (lambda p: L.indicator_loss(p, gt)), [rng.uniform(0.05, 0.95, size=(4, 4))]


def _targets(rng, b):
    return L.Targets(beta=rng.normal(size=(b, 10)), theta=rng.normal(size=(b, 22, 3)), t=rng.normal(size=(b, 3)),
                     R6=rng.normal(size=(b, 6)), T=rng.normal(size=(b, 3)), joints=rng.normal(size=(b, _J, 3)),
                     proj=rng.normal(size=(b, _J, 2)), g=rng.normal(size=(b, 2, 15, 3)),
                     contact=rng.uniform(size=(b, 2)), prev_contact_joints=rng.normal(size=(b, 2, 3)),
                     contact_ids=(0, 1), views=_V, frames=_K)


def _estimate_fn(gt, weights, desc):
    def fn(beta, theta, t, R6, T, joints, proj, g):
        est = L.Estimate(beta, theta, t, R6, T, joints, proj, g)
        if desc:
            return L.loss_desc([est] * (weights.iterations + 1), gt, weights).total
        return L.loss_rec(est, gt, weights).total
    return fn


def _estimate_inputs(rng, b):
    return [rng.normal(size=s) for s in ((b, 10), (b, 22, 3), (b, 3), (b, 6), (b, 3), (b, _J, 3), (b, _J, 2),
                                         (b, 2, 15, 3))]


@register("loss_rec")
def _rec(rng):
    gt = _targets(rng, _V * _K)
    return _estimate_fn(gt, L.LossWeights(), False), _estimate_inputs(rng, _V * _K)


@register("loss_desc")
def _desc(rng):
    gt = _targets(rng, _V * _K)
    return _estimate_fn(gt, L.LossWeights(), True), _estimate_inputs(rng, _V * _K)
