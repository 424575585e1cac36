"""Differentiable forward kinematics for :class:`ParametricSkeleton`."""

from __future__ import annotations

import numpy as np

from ..skeleton import ParametricSkeleton
from . import functional as F
from .tensor import Tensor, as_tensor, concat, matmul, stack


def forward_kinematics(skel: ParametricSkeleton, beta, theta, t, g=None) -> Tensor:
    """Batched FK: beta (B, 10), theta (B, 22, 3), t (B, 3), g (B, 2, H, 3) -> (B, J, 3).

    Matches :func:`proxymotion.skeleton.forward_kinematics_arrays`.
    """
    beta, theta, t = as_tensor(beta), as_tensor(theta), as_tensor(t)
    b = theta.shape[0]
    if g is None:
        g = Tensor(np.zeros((b, 2, skel.num_hand_joints, 3)))
    g = as_tensor(g)
    aa = concat([theta, g.reshape(b, 2 * skel.num_hand_joints, 3)], axis=1)
    local = F.axis_angle_to_matrix(aa)                                    # B, J, 3, 3
    basis = Tensor(skel.shape_basis.reshape(-1, skel.shape_basis.shape[-1]))
    off = (matmul(beta, basis.T).reshape(b, skel.joint_count, 3, 1)
           + skel.rest_offset[None, :, :, None])                          # B, J, 3, 1
    glob = [local[:, 0]]
    pos = [off[:, 0, :, 0] + t]
    for i in range(1, skel.joint_count):
        p = int(skel.parent[i])
        glob.append(matmul(glob[p], local[:, i]))
        pos.append(pos[p] + matmul(glob[p], off[:, i])[..., 0])
    return stack(pos, axis=1)
