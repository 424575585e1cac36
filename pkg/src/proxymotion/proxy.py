"""Synthesis of 2D-skeleton / 3D-motion training pairs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from . import rotations
from .camera import CameraRanges, CameraTrajectory, project, sample_trajectory
from .coords import HumanCentricTrack, canonicalize, decompose_body
from .skeleton import MotionSequence, ParametricSkeleton, motion_joints

BODY_FPS = 60.0
HAND_SOURCE_FPS = 30.0
HAND_UPSAMPLE_FPS = (40.0, 50.0, 60.0)
MIN_HAND_CLIP_SECONDS = 0.5


@dataclass(frozen=True)
class ContactParams:
    v_max: float = 0.2
    z_max: float = 0.08
    k_v: float = 0.04
    k_z: float = 0.008

    def __post_init__(self):
        for name in ("v_max", "z_max", "k_v", "k_z"):
            if not getattr(self, name) > 0:
                raise ValueError(f"contact parameter {name} must be positive")


def contact_indicator(v, z, params: ContactParams = ContactParams()):
    """Soft ground-contact probability from joint speed (m/s) and height (m)."""
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    return expit((params.v_max - v) / params.k_v) * expit((params.z_max - z) / params.k_z)


def joint_speeds(joints, fps: float, scheme: str = "backward") -> np.ndarray:
    """Per-frame speed of (F, C, 3) joint tracks.

    "backward" uses J_t - J_{t-1} (forward difference at frame 0), which is
    the frame-pair velocity the descent module sees. "central" averages the
    neighbours in the interior. A single frame has zero speed.
    """
    joints = np.asarray(joints, dtype=float)
    n = len(joints)
    if n < 2:
        return np.zeros(joints.shape[:-1])
    if scheme == "backward":
        d = np.empty_like(joints)
        d[1:] = joints[1:] - joints[:-1]
        d[0] = joints[1] - joints[0]
    elif scheme == "central":
        d = np.gradient(joints, axis=0)
    else:
        raise ValueError(f"unknown velocity scheme {scheme!r}")
    return np.linalg.norm(d, axis=-1) * fps


def contacts_from_joints(joints, fps: float, contact_ids, params: ContactParams = ContactParams(),
                         scheme: str = "backward") -> np.ndarray:
    sub = np.asarray(joints, dtype=float)[:, list(contact_ids)]
    return contact_indicator(joint_speeds(sub, fps, scheme), sub[..., 1], params)


def label_contacts(skel: ParametricSkeleton, motion: MotionSequence, params: ContactParams = ContactParams(),
                   scheme: str = "backward") -> np.ndarray:
    """Continuous (F, C) contact labels of the skeleton's contact joints."""
    return contacts_from_joints(motion_joints(skel, motion), motion.fps, skel.contact_joint_ids, params, scheme)


def _slerp_frames(aa: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Sample axis-angle tracks (F, ...) at fractional frame positions."""
    i0 = np.floor(positions).astype(int)
    i0 = np.clip(i0, 0, len(aa) - 1)
    i1 = np.minimum(i0 + 1, len(aa) - 1)
    frac = positions - i0
    out = aa[i0].copy()
    inner = frac > 0
    if np.any(inner):
        q0 = rotations.axis_angle_to_quaternion(aa[i0[inner]])
        q1 = rotations.axis_angle_to_quaternion(aa[i1[inner]])
        shape = (-1,) + (1,) * (q0.ndim - 2)
        q = rotations.quaternion_slerp(q0, q1, frac[inner].reshape(shape))
        out[inner] = rotations.quaternion_to_axis_angle(q)
    return out


def _sample_positions(num_frames: int, src_fps: float, dst_fps: float) -> np.ndarray:
    ratio = src_fps / dst_fps
    count = int(np.floor((num_frames - 1) / ratio + 1e-9)) + 1
    pos = np.arange(count) * ratio
    snapped = np.round(pos)
    return np.where(np.abs(pos - snapped) < 1e-9, snapped, pos)


def resample_motion(motion: MotionSequence, target_fps: float) -> MotionSequence:
    """Retime a motion: Slerp on joint rotations, linear on translation."""
    if not target_fps > 0:
        raise ValueError("target_fps must be positive")
    if len(motion) == 0:
        raise ValueError("cannot resample an empty motion")
    pos = _sample_positions(len(motion), motion.fps, target_fps)
    i0 = np.clip(np.floor(pos).astype(int), 0, len(motion) - 1)
    i1 = np.minimum(i0 + 1, len(motion) - 1)
    frac = (pos - i0)[:, None]
    t = motion.t[i0] * (1.0 - frac) + motion.t[i1] * frac
    return MotionSequence(motion.beta.copy(), _slerp_frames(motion.theta, pos), t,
                          _slerp_frames(motion.g, pos), target_fps)


@dataclass(eq=False)
class HandClip:
    """Hand articulation track g of shape (F, 2, H, 3)."""

    g: np.ndarray
    fps: float = HAND_SOURCE_FPS

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)

    def __len__(self) -> int:
        return len(self.g)


@dataclass(frozen=True)
class HandIntegration:
    upsample_fps: float
    offset: int
    source_positions: np.ndarray


def integrate_hands(body_motion: MotionSequence, hand_clip: HandClip, rng_seed, return_info: bool = False):
    """Replace a body motion's hand channels with a retimed hand clip.

    The clip is Slerp-upsampled to a random rate in {40, 50, 60} fps and its
    frames are then laid one per body frame from a random start, so each rate
    also changes the gesture speed. Clips shorter than the body are played
    back and forth.
    """
    if hand_clip.fps != HAND_SOURCE_FPS:
        raise ValueError(f"hand clips must be {HAND_SOURCE_FPS:g} fps, got {hand_clip.fps}")
    if len(hand_clip) / hand_clip.fps < MIN_HAND_CLIP_SECONDS:
        raise ValueError(f"hand clip shorter than {MIN_HAND_CLIP_SECONDS} s")
    rng = np.random.default_rng(rng_seed)
    up_fps = float(rng.choice(HAND_UPSAMPLE_FPS))
    up_pos = _sample_positions(len(hand_clip), hand_clip.fps, up_fps)
    n_up = len(up_pos)
    n = len(body_motion)
    if n_up >= n:
        offset = int(rng.integers(0, n_up - n + 1))
        idx = offset + np.arange(n)
    else:
        offset = int(rng.integers(0, n_up))
        period = 2 * (n_up - 1) if n_up > 1 else 1
        k = (offset + np.arange(n)) % period
        idx = np.where(k < n_up, k, period - k)
    src = up_pos[idx]
    out = body_motion.copy()
    out.g = _slerp_frames(hand_clip.g, src)
    if return_info:
        return out, HandIntegration(up_fps, offset, src)
    return out


def noise_std(noise: float, mode: str = "std") -> float:
    """Standard deviation for the 3D jitter setting.

    "std" reads the setting as sigma in meters; "variance" as sigma^2.
    """
    if mode == "std":
        return float(noise)
    if mode == "variance":
        return float(np.sqrt(noise))
    raise ValueError(f"unknown noise mode {mode!r}")


def joint_noise(shape, noise: float, mode: str, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, noise_std(noise, mode), size=shape)


@dataclass(eq=False)
class ProxySequence:
    joints2d: np.ndarray
    confidence: np.ndarray
    contact: np.ndarray
    camera: CameraTrajectory
    source_id: str
    canonical_gt: HumanCentricTrack
    beta: np.ndarray
    g: np.ndarray
    fps: float = BODY_FPS
    keypoint_groups: tuple = None

    def __post_init__(self):
        n = len(self.joints2d)
        for name in ("confidence", "contact"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} frames, joints2d has {n}")
        if len(self.camera) != n or len(self.canonical_gt) != n:
            raise ValueError("camera and labels must cover every frame")
        if np.any((self.contact < 0) | (self.contact > 1)):
            raise ValueError("contact labels must lie in [0, 1]")
        if not np.all((self.confidence == 0) | (self.confidence == 1)):
            raise ValueError("confidence must be binary")

    def __len__(self) -> int:
        return len(self.joints2d)


def default_keypoint_groups(skel: ParametricSkeleton) -> tuple:
    b, h = skel.num_body_joints, skel.num_hand_joints
    return (np.arange(b), np.arange(b, b + h), np.arange(b + h, b + 2 * h))


def synthesize_proxy(skel: ParametricSkeleton, motion: MotionSequence, num_cameras: int = 4,
                     noise: float = 0.01, noise_mode: str = "std", rng_seed=0, *,
                     keypoint_map=None, ranges: CameraRanges = CameraRanges(),
                     contact_params: ContactParams = ContactParams(), follow: bool = True,
                     source_id: str = "motion", num_waypoints: int = 4) -> list:
    """Render one motion as 2D proxies under `num_cameras` virtual cameras.

    The motion is canonicalized, its joints are jittered with i.i.d. Gaussian
    noise (fresh per camera) and projected. Keypoints behind the camera or
    outside the image get confidence 0. Contact labels and (theta_H, t_H)
    depend on the motion only and are shared by every camera.
    """
    if motion.fps != BODY_FPS:
        raise ValueError(f"motion must be at {BODY_FPS:g} fps, got {motion.fps}; resample first")
    J_root = skel.root_position(motion.beta)
    canon = canonicalize(motion, J_root)
    joints = motion_joints(skel, canon)
    contact = contacts_from_joints(joints, canon.fps, skel.contact_joint_ids, contact_params)
    body = decompose_body(canon, J_root)
    kmap = None if keypoint_map is None else np.asarray(keypoint_map, dtype=float)
    groups = default_keypoint_groups(skel) if kmap is None else (np.arange(len(kmap)),)

    out = []
    children = np.random.SeedSequence(rng_seed).spawn(num_cameras)
    for c, child in enumerate(children):
        cam_seed, noise_seed = child.spawn(2)
        traj = sample_trajectory(cam_seed, len(canon), joints[:, 0], fps=canon.fps, ranges=ranges,
                                 follow=follow, num_waypoints=num_waypoints)
        noisy = joints + joint_noise(joints.shape, noise, noise_mode, np.random.default_rng(noise_seed))
        kp = noisy if kmap is None else np.einsum("kj,fjc->fkc", kmap, noisy)
        uv, valid = project(kp, traj.intrinsics, traj.R, traj.T)
        w, h = traj.intrinsics.image_size
        with np.errstate(invalid="ignore"):
            inside = valid & (uv[..., 0] >= 0) & (uv[..., 0] < w) & (uv[..., 1] >= 0) & (uv[..., 1] < h)
        if not inside.any():
            warnings.warn(f"{source_id} camera {c}: subject never visible; sequence dropped", RuntimeWarning,
                          stacklevel=2)
            continue
        out.append(ProxySequence(
            joints2d=np.where(valid[..., None], uv, 0.0),
            confidence=inside.astype(float),
            contact=contact.copy(),
            camera=traj,
            source_id=source_id,
            canonical_gt=body.with_camera(traj),
            beta=canon.beta.copy(),
            g=canon.g.copy(),
            fps=canon.fps,
            keypoint_groups=groups,
        ))
    return out


def _span_mask(num_frames: int, rate: float, span, rng: np.random.Generator) -> np.ndarray:
    """Alternating masked spans (uniform length) and gaps with mean fraction `rate`."""
    mask = np.zeros(num_frames, dtype=bool)
    if rate <= 0:
        return mask
    if rate >= 1:
        mask[:] = True
        return mask
    lo, hi = span
    mean_span = 0.5 * (lo + hi)
    mean_gap = mean_span * (1.0 - rate) / rate
    p = 1.0 / (1.0 + mean_gap)
    f = 0
    masked = rng.random() < rate
    # start inside a span or gap at a uniformly random phase
    first = True
    while f < num_frames:
        if masked:
            length = int(rng.integers(lo, hi + 1))
            if first:
                length = int(rng.integers(1, length + 1))
            mask[f:f + length] = True
        else:
            length = int(rng.geometric(p)) - 1
            if first and length > 0:
                length = int(rng.integers(0, length + 1))
        f += length
        masked = not masked
        first = False
    return mask


def mask_failures(proxy: ProxySequence, drop_rate: float = 0.5, rng_seed=0, *, hand_boost: float = 1.2,
                  span=(3, 15)) -> ProxySequence:
    """Simulate detector dropouts as bursts over whole keypoint groups.

    Hands drop `hand_boost` times more often than the body while the overall
    masked fraction of keypoint entries stays `drop_rate`. Masked entries get
    confidence 0 and zero coordinates.
    """
    if not 0.0 <= drop_rate <= 1.0:
        raise ValueError("drop_rate must lie in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    groups = proxy.keypoint_groups or (np.arange(proxy.joints2d.shape[1]),)
    sizes = np.array([len(g) for g in groups], dtype=float)
    total = sizes.sum()
    if len(groups) > 1:
        hand = min(1.0, hand_boost * drop_rate)
        body = (total * drop_rate - sizes[1:].sum() * hand) / sizes[0]
        rates = [float(np.clip(body, 0.0, 1.0))] + [hand] * (len(groups) - 1)
    else:
        rates = [drop_rate]
    n = len(proxy)
    drop = np.zeros(proxy.confidence.shape, dtype=bool)
    for grp, rate in zip(groups, rates):
        drop[:, grp] = _span_mask(n, rate, span, rng)[:, None]
    conf = np.where(drop, 0.0, proxy.confidence)
    j2d = np.where(drop[..., None], 0.0, proxy.joints2d)
    return replace(proxy, confidence=conf, joints2d=j2d)
