"""Procedural motions for tests, demos and toy-scale training.

These stand in for motion-capture archives: smooth, deterministic given a
seed, and expressed with the same parameters as real data.
"""

from __future__ import annotations

import numpy as np

from . import rotations
from .skeleton import NUM_BETAS, MotionSequence, ParametricSkeleton, forward_kinematics_arrays, ground_offset
from .proxy import HandClip

_J = {name: i for i, name in enumerate((
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist"))}


def _root_orientation(yaw, pitch=0.0, roll=0.0):
    Ry = rotations.yaw_matrix(yaw)
    Rx = rotations.axis_angle_to_matrix(np.stack([pitch, np.zeros_like(pitch), np.zeros_like(pitch)], -1))
    Rz = rotations.axis_angle_to_matrix(np.stack([np.zeros_like(roll), np.zeros_like(roll), roll], -1))
    return rotations.matrix_to_axis_angle(Ry @ Rx @ Rz)


def synthetic_walk(skel: ParametricSkeleton, num_frames: int, fps: float = 60.0, seed=0,
                   beta=None) -> MotionSequence:
    """A walk with gait-like limb swing, a drifting heading and some bob."""
    rng = np.random.default_rng(seed)
    beta = rng.normal(0.0, 0.5, NUM_BETAS) if beta is None else np.asarray(beta, dtype=float)
    time = np.arange(num_frames) / fps
    cadence = rng.uniform(0.8, 1.1)
    phase = 2.0 * np.pi * cadence * time
    speed = rng.uniform(0.6, 1.4)
    yaw = rng.uniform(-np.pi, np.pi) + rng.uniform(-0.6, 0.6) * time + 0.1 * np.sin(0.5 * phase)
    swing = rng.uniform(0.3, 0.5)

    theta = np.zeros((num_frames, skel.num_body_joints, 3))
    theta[:, 0] = _root_orientation(yaw, 0.05 * np.sin(2 * phase), 0.03 * np.sin(phase))
    theta[:, _J["left_hip"], 0] = -swing * np.sin(phase)
    theta[:, _J["right_hip"], 0] = swing * np.sin(phase)
    theta[:, _J["left_knee"], 0] = 0.6 * np.clip(np.sin(phase + 1.2), 0.0, None)
    theta[:, _J["right_knee"], 0] = 0.6 * np.clip(-np.sin(phase + 1.2), 0.0, None)
    theta[:, _J["left_ankle"], 0] = 0.15 * np.sin(phase + 0.4)
    theta[:, _J["right_ankle"], 0] = -0.15 * np.sin(phase + 0.4)
    theta[:, _J["spine1"], 1] = 0.08 * np.sin(phase)
    theta[:, _J["left_shoulder"], 2] = -1.2 + 0.05 * np.sin(phase)
    theta[:, _J["right_shoulder"], 2] = 1.2 - 0.05 * np.sin(phase)
    theta[:, _J["left_shoulder"], 0] = 0.4 * np.sin(phase)
    theta[:, _J["right_shoulder"], 0] = -0.4 * np.sin(phase)
    theta[:, _J["left_elbow"], 1] = 0.3 + 0.1 * np.sin(phase)
    theta[:, _J["right_elbow"], 1] = -0.3 - 0.1 * np.sin(phase)
    theta[:, _J["head"], 1] = 0.2 * np.sin(0.3 * phase)

    step = speed / fps * np.stack([np.sin(yaw), np.zeros_like(yaw), np.cos(yaw)], -1)
    t = np.cumsum(step, axis=0) - step[0] + np.array([rng.uniform(-2, 2), 0.0, rng.uniform(-2, 2)])
    g = np.zeros((num_frames, 2, skel.num_hand_joints, 3))
    # keep the lowest foot joint on the ground so the stance foot neither sinks nor floats
    feet = forward_kinematics_arrays(skel, beta, theta, t, g)[:, list(skel.contact_joint_ids), 1]
    t[:, 1] = -feet.min(axis=1)
    return MotionSequence(beta, theta, t, g, fps)


def synthetic_hops(skel: ParametricSkeleton, num_frames: int, fps: float = 60.0, seed=0,
                   beta=None) -> MotionSequence:
    """Planted stances separated by quick hops.

    The legs stay in the rest pose, so the feet lie exactly on the ground with
    zero velocity during each stance, and they leave the ground fast enough
    to be labelled as airborne on every flight frame.
    """
    rng = np.random.default_rng(seed)
    beta = rng.normal(0.0, 0.5, NUM_BETAS) if beta is None else np.asarray(beta, dtype=float)
    base_y = -ground_offset(skel, beta)
    theta = np.zeros((num_frames, skel.num_body_joints, 3))
    t = np.zeros((num_frames, 3))
    yaw = rng.uniform(-np.pi, np.pi)
    pos = np.array([rng.uniform(-1, 1), 0.0, rng.uniform(-1, 1)])
    f = 0
    while f < num_frames:
        stance = int(rng.integers(20, 40))
        for _ in range(stance):
            if f >= num_frames:
                break
            theta[f, 0] = _root_orientation(np.array(yaw))
            t[f] = pos + np.array([0.0, base_y, 0.0])
            f += 1
        flight = int(rng.integers(10, 16))
        height = rng.uniform(0.12, 0.25)
        turn = rng.uniform(-0.6, 0.6)
        dist = rng.uniform(0.2, 0.5)
        heading = yaw + rng.uniform(-0.5, 0.5)
        delta = dist * np.array([np.sin(heading), 0.0, np.cos(heading)])
        for k in range(1, flight + 1):
            if f >= num_frames:
                break
            s = k / (flight + 1)
            theta[f, 0] = _root_orientation(np.array(yaw + s * turn))
            t[f] = pos + s * delta + np.array([0.0, base_y + 4.0 * height * s * (1 - s), 0.0])
            f += 1
        pos = pos + delta
        yaw = yaw + turn
    time = np.arange(num_frames) / fps
    phase = 2.0 * np.pi * rng.uniform(0.5, 1.0) * time
    theta[:, _J["left_shoulder"], 2] = -1.0 + 0.3 * np.sin(phase)
    theta[:, _J["right_shoulder"], 2] = 1.0 - 0.3 * np.sin(phase)
    theta[:, _J["spine2"], 1] = 0.1 * np.sin(0.5 * phase)
    theta[:, _J["neck"], 0] = 0.1 * np.sin(0.7 * phase)
    g = np.zeros((num_frames, 2, skel.num_hand_joints, 3))
    return MotionSequence(beta, theta, t, g, fps)


def synthetic_hand_clip(num_frames: int, fps: float = 30.0, seed=0, num_hand_joints: int = 15) -> HandClip:
    """Finger curls with independent smooth rhythms, at 30 fps by default."""
    rng = np.random.default_rng(seed)
    time = np.arange(num_frames) / fps
    freq = rng.uniform(0.3, 1.5, size=(2, num_hand_joints))
    phase = rng.uniform(0, 2 * np.pi, size=(2, num_hand_joints))
    amp = rng.uniform(0.1, 0.8, size=(2, num_hand_joints))
    curl = amp * (0.5 + 0.5 * np.sin(2 * np.pi * freq * time[:, None, None] + phase))
    g = np.zeros((num_frames, 2, num_hand_joints, 3))
    g[..., 2] = curl * np.array([1.0, -1.0])[:, None]
    g[..., 1] = 0.2 * curl[..., ::-1]
    return HandClip(g, fps)
