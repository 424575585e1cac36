"""Human-centric motion representation and its accumulation into world space.

Each frame t gets its own gravity-aligned human frame H_t: its origin is the
accumulated ground-plane position o_t of the previous frames and its yaw A_t
turns the current root heading onto +z, ``x_H = A_t (x_W - o_t)``. Root
orientation, translation and the camera are expressed in H_t. None of the
body quantities depend on the camera, so one motion seen by several cameras
yields identical (theta_H, t_H) labels.

Going back to world space uses only the camera in H_t to fix the yaw::

    R_W   = R_H R_front
    T_W   = -R_W (R_front^T (-R_H^T T_H) + t_xz)
    root  = R_front^T . root_H
    t_W   = R_front^T (t_H + J_root) - J_root + t_xz
    t_xz <- t_xz + R_front^T t_H            (y component dropped)

so the reconstructed world is gravity aligned with the camera heading on +z.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import rotations
from .camera import CameraTrajectory
from .skeleton import MotionSequence

_DEGENERATE = 1e-6


class InvariantError(ValueError):
    """A coordinate-frame invariant was violated by the inputs."""


@dataclass(frozen=True, eq=False)
class HumanCentricState:
    theta_H: np.ndarray
    t_H: np.ndarray
    R_H: np.ndarray
    T_H: np.ndarray

    def __post_init__(self):
        for name in ("theta_H", "t_H", "R_H", "T_H"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not rotations.is_rotation(self.R_H, 1e-9):
            raise InvariantError("R_H is not a proper rotation")


@dataclass(frozen=True, eq=False)
class WorldAccumulator:
    t_xz: np.ndarray = None
    frame_index: int = 0

    def __post_init__(self):
        t = np.zeros(3) if self.t_xz is None else np.asarray(self.t_xz, dtype=float)
        if t.shape != (3,):
            raise InvariantError(f"t_xz must be a 3-vector, got shape {t.shape}")
        if t[1] != 0.0:
            raise InvariantError(f"t_xz must have zero y component, got {t[1]!r}")
        object.__setattr__(self, "t_xz", t)


@dataclass(frozen=True, eq=False)
class WorldFrame:
    """World-space result of one human-to-world step."""

    theta_root: np.ndarray
    t_W: np.ndarray
    R_W: np.ndarray
    T_W: np.ndarray
    R_front: np.ndarray


def heading_yaw(R: np.ndarray) -> np.ndarray:
    """Yaw of the rotated local +z axis; falls back to the lateral axis.

    The fallback applies when the forward axis is within 1e-6 of vertical and
    uses the local +x axis turned by -90 degrees about +y.
    """
    R = np.asarray(R, dtype=float)
    fwd = R[..., :, 2]
    lat = R[..., :, 0]
    fwd_xz = np.hypot(fwd[..., 0], fwd[..., 2])
    alt = np.stack([-lat[..., 2], np.zeros_like(lat[..., 0]), lat[..., 0]], axis=-1)
    use = (fwd_xz < _DEGENERATE)[..., None]
    return rotations.heading_angle(np.where(use, alt, fwd))


def heading_alignment(R: np.ndarray) -> np.ndarray:
    """Yaw rotation taking the heading of R onto +z."""
    return rotations.yaw_matrix(-heading_yaw(R))


def _apply_root(mode: str, Rot: np.ndarray, theta_root: np.ndarray) -> np.ndarray:
    if mode == "compose":
        return rotations.matrix_to_axis_angle(Rot @ rotations.axis_angle_to_matrix(theta_root))
    if mode == "axis":
        return np.einsum("...ij,...j->...i", Rot, theta_root)
    raise ValueError(f"unknown root mode {mode!r}")


def canonicalize(motion: MotionSequence, root_offset=None, return_transform: bool = False):
    """Remove the frame-0 ground-plane position and turn its heading to +z.

    The rigid transform ``x -> Y (x - s)`` with s the frame-0 root joint's xz
    position and Y a yaw is applied to every frame. `root_offset` is the rest
    root joint J_root (zero means the translation itself is the root).
    """
    if len(motion) == 0:
        raise ValueError("cannot canonicalize an empty motion")
    j_root = np.zeros(3) if root_offset is None else np.asarray(root_offset, dtype=float)
    root0 = rotations.axis_angle_to_matrix(motion.theta[0, 0])
    Y = heading_alignment(root0)
    s = motion.t[0] + j_root
    s = np.array([s[0], 0.0, s[2]])
    out = motion.copy()
    out.t = (motion.t + j_root - s) @ Y.T - j_root
    out.theta[:, 0] = _apply_root("compose", Y, motion.theta[:, 0])
    if return_transform:
        return out, Y, s
    return out


def compute_R_front(R_H, T_H=None) -> np.ndarray:
    """Yaw R_front with ``R_front^T f`` on the +z half of the yz-plane.

    f is the camera optical axis expressed in human space (third row of R_H).
    A camera looking straight up or down has no heading; identity is returned
    with a warning.
    """
    f = np.asarray(R_H, dtype=float)[2]
    if np.hypot(f[0], f[2]) < _DEGENERATE:
        warnings.warn("camera optical axis is vertical; R_front set to identity", RuntimeWarning, stacklevel=2)
        return np.eye(3)
    return rotations.yaw_matrix(rotations.heading_angle(f))


def human_to_world(state: HumanCentricState, acc: WorldAccumulator, J_root,
                   root_mode: str = "compose", R_front=None):
    """One accumulation step; returns ``(WorldFrame, next_accumulator)``.

    root_mode "compose" rotates the root orientation as a matrix product;
    "axis" multiplies the axis-angle vector itself by R_front^T.
    """
    if acc.t_xz[1] != 0.0:
        raise InvariantError("accumulator t_xz has a non-zero y component")
    J_root = np.asarray(J_root, dtype=float)
    Rf = compute_R_front(state.R_H, state.T_H) if R_front is None else np.asarray(R_front, dtype=float)
    R_W = state.R_H @ Rf
    cam_H = -state.R_H.T @ state.T_H
    T_W = -R_W @ (Rf.T @ cam_H + acc.t_xz)
    theta_root = _apply_root(root_mode, Rf.T, state.theta_H[0])
    t_W = Rf.T @ (state.t_H + J_root) - J_root + acc.t_xz
    step = Rf.T @ state.t_H
    t_xz = acc.t_xz + np.array([step[0], 0.0, step[2]])
    return WorldFrame(theta_root, t_W, R_W, T_W, Rf), WorldAccumulator(t_xz, acc.frame_index + 1)


def world_to_human(frame: WorldFrame, acc: WorldAccumulator, J_root, theta_body=None,
                   root_mode: str = "compose") -> HumanCentricState:
    """Invert :func:`human_to_world` given the recorded R_front and t_xz."""
    J_root = np.asarray(J_root, dtype=float)
    Rf = frame.R_front
    R_H = frame.R_W @ Rf.T
    cam_W = -frame.R_W.T @ frame.T_W
    cam_H = Rf @ (cam_W - acc.t_xz)
    T_H = -R_H @ cam_H
    t_H = Rf @ (frame.t_W + J_root - acc.t_xz) - J_root
    root = _apply_root(root_mode, Rf, frame.theta_root)
    if theta_body is None:
        theta = root[None]
    else:
        theta = np.concatenate([root[None], np.asarray(theta_body, dtype=float)], axis=0)
    return HumanCentricState(theta, t_H, R_H, T_H)


@dataclass(eq=False)
class HumanCentricTrack:
    """Per-frame human-centric labels for one motion under one camera.

    heading (A_t) and origin (o_t) describe each human frame in the
    canonical world: ``x_H = heading[t] @ (x_W - origin[t])``.
    """

    theta_H: np.ndarray
    t_H: np.ndarray
    R_H: np.ndarray
    T_H: np.ndarray
    heading: np.ndarray
    origin: np.ndarray

    def __len__(self) -> int:
        return len(self.t_H)

    def state(self, i: int) -> HumanCentricState:
        return HumanCentricState(self.theta_H[i], self.t_H[i], self.R_H[i], self.T_H[i])

    def with_camera(self, camera: CameraTrajectory) -> "HumanCentricTrack":
        R_H = np.einsum("fij,fkj->fik", camera.R, self.heading)
        T_H = np.einsum("fij,fj->fi", camera.R, self.origin) + camera.T
        return replace(self, R_H=R_H, T_H=T_H)


def decompose_body(motion: MotionSequence, J_root) -> HumanCentricTrack:
    """Camera-independent part of the human-centric labels.

    Camera fields are filled with identity extrinsics; use
    :meth:`HumanCentricTrack.with_camera` to attach a real camera.
    """
    J_root = np.asarray(J_root, dtype=float)
    n = len(motion)
    root = rotations.axis_angle_to_matrix(motion.theta[:, 0])
    heading = heading_alignment(root)
    theta_H = motion.theta.copy()
    theta_H[:, 0] = rotations.matrix_to_axis_angle(heading @ root)
    t_H = np.empty((n, 3))
    origin = np.zeros((n, 3))
    o = np.zeros(3)
    for f in range(n):
        origin[f] = o
        t_H[f] = heading[f] @ (motion.t[f] + J_root - o) - J_root
        step = heading[f].T @ t_H[f]
        o = o + np.array([step[0], 0.0, step[2]])
    R_H = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
    return HumanCentricTrack(theta_H, t_H, R_H, np.zeros((n, 3)), heading, origin)


def decompose(motion: MotionSequence, camera: CameraTrajectory, J_root) -> HumanCentricTrack:
    """Human-centric labels of a canonical world motion observed by `camera`."""
    if len(camera) != len(motion):
        raise InvariantError(f"camera has {len(camera)} frames, motion has {len(motion)}")
    return decompose_body(motion, J_root).with_camera(camera)


@dataclass(eq=False)
class WorldTrack:
    theta: np.ndarray
    t: np.ndarray
    R: np.ndarray
    T: np.ndarray
    R_front: np.ndarray
    t_xz: np.ndarray


def accumulate(theta_H, t_H, R_H, T_H, J_root, root_mode: str = "compose",
               acc: WorldAccumulator = None) -> WorldTrack:
    """Run :func:`human_to_world` frame by frame from an empty accumulator."""
    acc = WorldAccumulator() if acc is None else acc
    n = len(t_H)
    theta_W = np.array(theta_H, dtype=float, copy=True)
    out = WorldTrack(theta_W, np.empty((n, 3)), np.empty((n, 3, 3)), np.empty((n, 3)),
                     np.empty((n, 3, 3)), np.empty((n, 3)))
    for f in range(n):
        state = HumanCentricState(theta_H[f], t_H[f], R_H[f], T_H[f])
        out.t_xz[f] = acc.t_xz
        frame, acc = human_to_world(state, acc, J_root, root_mode)
        out.theta[f, 0] = frame.theta_root
        out.t[f] = frame.t_W
        out.R[f] = frame.R_W
        out.T[f] = frame.T_W
        out.R_front[f] = frame.R_front
    return out


def accumulate_track(track: HumanCentricTrack, J_root, root_mode: str = "compose") -> WorldTrack:
    return accumulate(track.theta_H, track.t_H, track.R_H, track.T_H, J_root, root_mode)
