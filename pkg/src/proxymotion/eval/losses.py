"""Training objectives on :class:`~proxymotion.nn.Tensor` values.

A batch is laid out view-major: ``B = views * frames`` entries where entry
``v * frames + k`` is camera view v at consecutive frame k of one motion.
The cross-view consistency term compares views at equal k, the smoothness
term compares consecutive k within a view. Either is skipped when the
layout does not support it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..nn import functional as F
from ..nn.tensor import Tensor, absolute, as_tensor, mean, norm, stack, tsum


@dataclass
class LossWeights:
    w_3d: float = 1.0
    w_traj: float = 1.0
    w_2d: float = 1.0
    w_theta: float = 1.0
    w_beta: float = 0.1
    w_cam: float = 1.0
    w_consist: float = 0.5
    w_smooth: float = 0.5
    w_contact: float = 0.5
    w_ind: float = 1.0
    u: float = 0.8
    iterations: int = 3

    def __post_init__(self):
        if not 0.0 < self.u <= 1.0:
            raise ValueError("decay u must lie in (0, 1]")
        for name, value in vars(self).items():
            if name.startswith("w_") and value < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class Estimate:
    """Per-entry predictions as tensors (B leading)."""

    beta: Tensor
    theta: Tensor
    t: Tensor
    R6: Tensor
    T: Tensor
    joints: Tensor
    proj: Tensor
    g: Optional[Tensor] = None
    ind: Optional[Tensor] = None


@dataclass
class Targets:
    """Ground truth as arrays matching :class:`Estimate` plus layout."""

    beta: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    t: Optional[np.ndarray] = None
    R6: Optional[np.ndarray] = None
    T: Optional[np.ndarray] = None
    joints: Optional[np.ndarray] = None
    proj: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    contact: Optional[np.ndarray] = None
    prev_contact_joints: Optional[np.ndarray] = None
    contact_ids: tuple = (7, 8, 10, 11)
    fps: float = 60.0
    views: int = 1
    frames: int = 1


@dataclass
class LossReport:
    total: Tensor
    terms: Dict[str, float] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)


def mpjpe(pred, gt) -> Tensor:
    """Mean Euclidean joint error over all leading axes."""
    return mean(norm(as_tensor(pred) - gt, axis=-1))


def l1(pred, gt) -> Tensor:
    return mean(absolute(as_tensor(pred) - gt))


def mse(pred, gt) -> Tensor:
    d = as_tensor(pred) - gt
    return mean(d * d)


def _grid(x: Tensor, views: int, frames: int) -> Tensor:
    return x.reshape(views, frames, *x.shape[1:])


def consistency(theta: Tensor, t: Tensor, views: int, frames: int) -> Tensor:
    """L1 between every pair of views at the same frame."""
    th, tt = _grid(theta, views, frames), _grid(t, views, frames)
    total, pairs = None, 0
    for a in range(views):
        for b in range(a + 1, views):
            term = mean(absolute(th[a] - th[b])) + mean(absolute(tt[a] - tt[b]))
            total = term if total is None else total + term
            pairs += 1
    return total * (1.0 / pairs)


def smoothness(joints: Tensor, gt_joints: np.ndarray, views: int, frames: int) -> Tensor:
    """L1 mismatch of first and (when available) second temporal differences."""
    p = _grid(joints, views, frames)
    g = gt_joints.reshape(views, frames, *gt_joints.shape[1:])
    dp = p[:, 1:] - p[:, :-1]
    dg = g[:, 1:] - g[:, :-1]
    out = l1(dp, dg)
    if frames >= 3:
        out = out + l1(dp[:, 1:] - dp[:, :-1], dg[:, 1:] - dg[:, :-1])
    return out


def contact_deviation(joints, prev_contact_joints, contact_ids, fps: float):
    """Per contact joint xz velocity (B, C, 2) and height (B, C) tensors."""
    joints = as_tensor(joints)
    cur = stack([joints[:, j] for j in contact_ids], axis=1)
    vel = (cur - prev_contact_joints) * fps
    return stack([vel[..., 0], vel[..., 2]], axis=-1), cur[..., 1]


def contact_loss(joints, prev_contact_joints, ind_gt, contact_ids, fps: float) -> Tensor:
    """Mean over entries of ``ind_gt * (|v_xz| + |d_y|)`` with ind_gt binarized at 0.5."""
    v_xz, d_y = contact_deviation(joints, prev_contact_joints, contact_ids, fps)
    hard = (np.asarray(ind_gt) >= 0.5).astype(float)
    return mean((norm(v_xz, axis=-1) + absolute(d_y)) * hard)


def indicator_loss(ind, ind_gt) -> Tensor:
    return mean(F.binary_cross_entropy(ind, np.asarray(ind_gt, dtype=float)))


def loss_rec(pred: Estimate, gt: Targets, weights: LossWeights = LossWeights()) -> LossReport:
    """Weighted sum of the recovery terms; terms lacking ground truth are skipped."""
    terms: Dict[str, Tensor] = {}
    skipped: List[str] = []

    def need(name, *arrays):
        if any(a is None for a in arrays):
            skipped.append(name)
            return False
        return True

    if need("3d", gt.joints, gt.t):
        terms["3d"] = weights.w_3d * mpjpe(pred.joints, gt.joints) + weights.w_traj * mean(
            tsum(absolute(pred.t - gt.t), axis=-1))
    if need("2d", gt.proj):
        terms["2d"] = weights.w_2d * mpjpe(pred.proj, gt.proj)
    if need("theta", gt.theta):
        th = mse(pred.theta, gt.theta)
        if pred.g is not None and gt.g is not None:
            th = th + mse(pred.g, gt.g)
        terms["theta"] = weights.w_theta * th
    if need("beta", gt.beta):
        terms["beta"] = weights.w_beta * mse(pred.beta, gt.beta)
    if need("cam", gt.R6, gt.T):
        terms["cam"] = weights.w_cam * (l1(pred.R6, gt.R6) + l1(pred.T, gt.T))
    if gt.views >= 2:
        terms["consist"] = weights.w_consist * consistency(pred.theta, pred.t, gt.views, gt.frames)
    else:
        skipped.append("consist")
    if gt.frames >= 2 and gt.joints is not None:
        terms["smooth"] = weights.w_smooth * smoothness(pred.joints, gt.joints, gt.views, gt.frames)
    else:
        skipped.append("smooth")
    if not terms:
        raise ValueError("no loss term has ground truth")
    total = None
    for value in terms.values():
        total = value if total is None else total + value
    return LossReport(total, {k: float(v.data) for k, v in terms.items()}, skipped)


def loss_desc(trace: List[Estimate], gt: Targets, weights: LossWeights = LossWeights()) -> LossReport:
    """Decayed sum over the N refined states: ``sum_k u^(N-k) (L_rec + L_contact)``.

    `trace` holds the N+1 states of a descent run; entry 0 (the initial
    state) is not part of the sum.
    """
    n = len(trace) - 1
    if n != weights.iterations:
        raise ValueError(f"trace has {n} iterations, weights expect {weights.iterations}")
    total = None
    terms: Dict[str, float] = {}
    skipped: List[str] = []
    for k in range(1, n + 1):
        rec = loss_rec(trace[k], gt, weights)
        step = rec.total
        if gt.contact is not None and gt.prev_contact_joints is not None:
            lc = contact_loss(trace[k].joints, gt.prev_contact_joints, gt.contact, gt.contact_ids, gt.fps)
            step = step + weights.w_contact * lc
            terms[f"contact_{k}"] = float(lc.data)
        elif "contact" not in skipped:
            skipped.append("contact")
        terms[f"rec_{k}"] = float(rec.total.data)
        for s in rec.skipped:
            if s not in skipped:
                skipped.append(s)
        weighted = step * (weights.u ** (n - k))
        total = weighted if total is None else total + weighted
    return LossReport(total, terms, skipped)


def decay_weights(n: int, u: float) -> np.ndarray:
    return u ** (n - np.arange(1, n + 1, dtype=float))
