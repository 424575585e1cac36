"""Joints-only parametric body skeleton and forward kinematics.

The body follows the 22-joint SMPL ordering; each hand adds 15 finger joints
parented to the wrists. Up is +y, the ground is the plane y = 0, and a body in
rest pose faces +z with its left side on +x.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rotations

NUM_BETAS = 10
NUM_BODY_JOINTS = 22
NUM_HAND_JOINTS = 15

BODY_JOINT_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
)
BODY_PARENTS = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19)
FINGERS = ("index", "middle", "pinky", "ring", "thumb")
LEFT_WRIST, RIGHT_WRIST = 20, 21
DEFAULT_CONTACT_JOINTS = ("left_ankle", "right_ankle", "left_foot", "right_foot")


class SkeletonError(ValueError):
    """Raised for malformed skeletons or poses that do not fit one."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True, eq=False)
class ParametricSkeleton:
    names: tuple
    parent: np.ndarray
    rest_offset: np.ndarray
    shape_basis: np.ndarray
    contact_joint_ids: tuple
    num_body_joints: int = NUM_BODY_JOINTS

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=int)
        offset = np.asarray(self.rest_offset, dtype=float)
        basis = np.asarray(self.shape_basis, dtype=float)
        n = len(parent)
        if n == 0 or parent[0] != -1:
            raise SkeletonError("parent", "joint 0 must be the root (parent -1)")
        for i in range(1, n):
            if not 0 <= parent[i] < i:
                raise SkeletonError("parent", f"joint {i} has parent {parent[i]}; parents must precede children")
        if offset.shape != (n, 3):
            raise SkeletonError("rest_offset", f"expected shape ({n}, 3), got {offset.shape}")
        if basis.shape != (n, 3, NUM_BETAS):
            raise SkeletonError("shape_basis", f"expected shape ({n}, 3, {NUM_BETAS}), got {basis.shape}")
        if len(self.names) != n:
            raise SkeletonError("names", f"expected {n} names, got {len(self.names)}")
        for j in self.contact_joint_ids:
            if not 0 <= j < n:
                raise SkeletonError("contact_joint_ids", f"invalid joint index {j}")
        for arr in (parent, offset, basis):
            arr.setflags(write=False)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "rest_offset", offset)
        object.__setattr__(self, "shape_basis", basis)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "contact_joint_ids", tuple(int(j) for j in self.contact_joint_ids))

    @property
    def joint_count(self) -> int:
        return len(self.parent)

    @property
    def num_hand_joints(self) -> int:
        return (self.joint_count - self.num_body_joints) // 2

    @property
    def root_joint_rest(self) -> np.ndarray:
        return self.rest_offset[0]

    def root_position(self, beta=None) -> np.ndarray:
        """Rest-pose root joint location J_root for a given shape."""
        if beta is None:
            return self.rest_offset[0].copy()
        return self.rest_offset[0] + self.shape_basis[0] @ np.asarray(beta, dtype=float)

    def offsets(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        return self.rest_offset + np.einsum("jck,...k->...jc", self.shape_basis, beta)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(list(self.names)).encode())
        for arr in (self.parent.astype("<i8"), self.rest_offset.astype("<f8"), self.shape_basis.astype("<f8")):
            h.update(arr.tobytes())
        h.update(json.dumps(list(self.contact_joint_ids)).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class FullBodyPose:
    beta: np.ndarray
    theta: np.ndarray
    t: np.ndarray
    g: np.ndarray = field(default_factory=lambda: np.zeros((2, NUM_HAND_JOINTS, 3)))

    def __post_init__(self):
        for name, shape in (("beta", (NUM_BETAS,)), ("t", (3,))):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise SkeletonError(name, f"expected shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[1] != 3:
            raise SkeletonError("theta", f"expected shape (J, 3), got {theta.shape}")
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 3 or g.shape[0] != 2 or g.shape[2] != 3:
            raise SkeletonError("g", f"expected shape (2, H, 3), got {g.shape}")
        for name, arr in (("theta", theta), ("g", g), ("beta", self.beta), ("t", self.t)):
            if not np.all(np.isfinite(arr)):
                raise SkeletonError(name, "contains non-finite values")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "g", g)

    @classmethod
    def zeros(cls, num_body_joints: int = NUM_BODY_JOINTS, num_hand_joints: int = NUM_HAND_JOINTS) -> "FullBodyPose":
        return cls(np.zeros(NUM_BETAS), np.zeros((num_body_joints, 3)), np.zeros(3),
                   np.zeros((2, num_hand_joints, 3)))

    def local_rotations(self) -> np.ndarray:
        return np.concatenate([self.theta, self.g.reshape(-1, 3)], axis=0)


@dataclass(eq=False)
class MotionSequence:
    """Per-frame body parameters stored as stacked arrays.

    beta is shared by the whole sequence; theta is (F, 22, 3), t is (F, 3)
    and g is (F, 2, 15, 3).
    """

    beta: np.ndarray
    theta: np.ndarray
    t: np.ndarray
    g: np.ndarray
    fps: float

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        if not self.fps > 0:
            raise SkeletonError("fps", f"must be positive, got {self.fps}")
        n = len(self.theta)
        if self.t.shape != (n, 3):
            raise SkeletonError("t", f"expected shape ({n}, 3), got {self.t.shape}")
        if self.g.shape[:2] != (n, 2) or self.g.shape[-1] != 3:
            raise SkeletonError("g", f"expected shape ({n}, 2, H, 3), got {self.g.shape}")
        if self.beta.shape != (NUM_BETAS,):
            raise SkeletonError("beta", f"expected shape ({NUM_BETAS},), got {self.beta.shape}")

    def __len__(self) -> int:
        return len(self.theta)

    @property
    def num_frames(self) -> int:
        return len(self.theta)

    def frame(self, i: int) -> FullBodyPose:
        return FullBodyPose(self.beta, self.theta[i], self.t[i], self.g[i])

    @property
    def frames(self) -> list:
        return [self.frame(i) for i in range(len(self))]

    @classmethod
    def from_frames(cls, frames, fps: float) -> "MotionSequence":
        if not frames:
            raise SkeletonError("frames", "motion must contain at least one frame")
        beta = frames[0].beta
        for f in frames[1:]:
            if not np.array_equal(f.beta, beta):
                raise SkeletonError("beta", "all frames of a sequence must share the same shape")
        return cls(beta, np.stack([f.theta for f in frames]), np.stack([f.t for f in frames]),
                   np.stack([f.g for f in frames]), fps)

    def copy(self) -> "MotionSequence":
        return MotionSequence(self.beta.copy(), self.theta.copy(), self.t.copy(), self.g.copy(), self.fps)


def _check_pose_dims(skel: ParametricSkeleton, theta, g):
    if theta.shape[-2] != skel.num_body_joints:
        raise SkeletonError("theta", f"expected {skel.num_body_joints} body joints, got {theta.shape[-2]}")
    if g.shape[-2] != skel.num_hand_joints:
        raise SkeletonError("g", f"expected {skel.num_hand_joints} joints per hand, got {g.shape[-2]}")


def forward_kinematics_arrays(skel: ParametricSkeleton, beta, theta, t, g=None) -> np.ndarray:
    """Vectorized FK over any leading batch axes.

    theta is (..., 22, 3), t is (..., 3), g is (..., 2, H, 3) and beta is (10,)
    or (..., 10). Returns joints of shape (..., J, 3).
    """
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    batch = theta.shape[:-2]
    if g is None:
        g = np.zeros(batch + (2, skel.num_hand_joints, 3))
    g = np.asarray(g, dtype=float)
    _check_pose_dims(skel, theta, g)
    aa = np.concatenate([theta, g.reshape(batch + (-1, 3))], axis=-2)
    if aa.shape[-2] != skel.joint_count:
        raise SkeletonError("theta", f"pose has {aa.shape[-2]} joints, skeleton has {skel.joint_count}")
    local = rotations.axis_angle_to_matrix(aa)
    off = np.broadcast_to(skel.offsets(beta), batch + (skel.joint_count, 3))
    glob = np.empty(batch + (skel.joint_count, 3, 3))
    pos = np.empty(batch + (skel.joint_count, 3))
    glob[..., 0, :, :] = local[..., 0, :, :]
    pos[..., 0, :] = off[..., 0, :] + t
    for i in range(1, skel.joint_count):
        p = skel.parent[i]
        glob[..., i, :, :] = glob[..., p, :, :] @ local[..., i, :, :]
        pos[..., i, :] = pos[..., p, :] + np.einsum("...ij,...j->...i", glob[..., p, :, :], off[..., i, :])
    return pos


def forward_kinematics(skel: ParametricSkeleton, pose: FullBodyPose) -> np.ndarray:
    """3D joint positions (J, 3) in meters for a single pose."""
    return forward_kinematics_arrays(skel, pose.beta, pose.theta, pose.t, pose.g)


def ground_offset(skel: ParametricSkeleton, beta=None) -> float:
    """Lowest contact-joint height of the rest pose at zero translation.

    Subtracting it from the root height puts a standing body on the ground.
    """
    beta = np.zeros(NUM_BETAS) if beta is None else beta
    zero = FullBodyPose(np.asarray(beta, dtype=float), np.zeros((skel.num_body_joints, 3)), np.zeros(3),
                        np.zeros((2, skel.num_hand_joints, 3)))
    joints = forward_kinematics(skel, zero)
    return float(joints[list(skel.contact_joint_ids), 1].min())


def motion_joints(skel: ParametricSkeleton, motion: MotionSequence) -> np.ndarray:
    return forward_kinematics_arrays(skel, motion.beta, motion.theta, motion.t, motion.g)


_FINGER_BASES = {
    "index": (0.095, 0.0, 0.025),
    "middle": (0.100, 0.0, 0.005),
    "pinky": (0.085, 0.0, -0.035),
    "ring": (0.095, 0.0, -0.015),
    "thumb": (0.030, -0.010, 0.035),
}
_FINGER_SEGMENTS = {"index": (0.035, 0.025), "middle": (0.040, 0.027), "pinky": (0.025, 0.020),
                    "ring": (0.037, 0.025), "thumb": (0.032, 0.028)}


def toy_skeleton() -> ParametricSkeleton:
    """Deterministic 52-joint body-and-hands skeleton with adult proportions.

    Feet joints (ankles and toes) sit on the ground plane in the rest pose, so
    a standing skeleton with zero translation touches y = 0.
    """
    body = {
        "pelvis": (0.0, 0.87, 0.0),
        "left_hip": (0.09, -0.08, 0.0), "right_hip": (-0.09, -0.08, 0.0),
        "spine1": (0.0, 0.11, -0.01),
        "left_knee": (0.01, -0.39, 0.01), "right_knee": (-0.01, -0.39, 0.01),
        "spine2": (0.0, 0.13, 0.0),
        "left_ankle": (0.0, -0.40, -0.04), "right_ankle": (0.0, -0.40, -0.04),
        "spine3": (0.0, 0.06, 0.02),
        "left_foot": (0.01, 0.0, 0.13), "right_foot": (-0.01, 0.0, 0.13),
        "neck": (0.0, 0.22, -0.02),
        "left_collar": (0.07, 0.14, -0.01), "right_collar": (-0.07, 0.14, -0.01),
        "head": (0.0, 0.10, 0.04),
        "left_shoulder": (0.11, 0.04, 0.0), "right_shoulder": (-0.11, 0.04, 0.0),
        "left_elbow": (0.26, 0.0, 0.0), "right_elbow": (-0.26, 0.0, 0.0),
        "left_wrist": (0.25, 0.0, 0.0), "right_wrist": (-0.25, 0.0, 0.0),
    }
    names = list(BODY_JOINT_NAMES)
    parents = list(BODY_PARENTS)
    offsets = [body[n] for n in names]
    for side, wrist, sign in (("left", LEFT_WRIST, 1.0), ("right", RIGHT_WRIST, -1.0)):
        for finger in FINGERS:
            bx, by, bz = _FINGER_BASES[finger]
            seg1, seg2 = _FINGER_SEGMENTS[finger]
            start = len(names)
            names.append(f"{side}_{finger}1")
            parents.append(wrist)
            offsets.append((sign * bx, by, bz))
            names.append(f"{side}_{finger}2")
            parents.append(start)
            offsets.append((sign * seg1, 0.0, 0.0))
            names.append(f"{side}_{finger}3")
            parents.append(start + 1)
            offsets.append((sign * seg2, 0.0, 0.0))

    offsets = np.array(offsets, dtype=float)
    n = len(names)
    basis = np.zeros((n, 3, NUM_BETAS))
    legs = {names.index(k) for k in ("left_knee", "right_knee", "left_ankle", "right_ankle")}
    arms = {names.index(k) for k in ("left_elbow", "right_elbow", "left_wrist", "right_wrist")}
    width = {names.index(k) for k in ("left_hip", "right_hip", "left_collar", "right_collar",
                                      "left_shoulder", "right_shoulder")}
    for i in range(1, n):
        basis[i, :, 0] = 0.04 * offsets[i]
        if i in legs:
            basis[i, 1, 1] = 0.03 * np.sign(offsets[i, 1])
        if i in arms:
            basis[i, 0, 2] = 0.02 * np.sign(offsets[i, 0])
        if i in width:
            basis[i, 0, 3] = 0.01 * np.sign(offsets[i, 0])
    rng = np.random.default_rng(20240611)
    basis[1:, :, 4:] = 0.002 * rng.standard_normal((n - 1, 3, NUM_BETAS - 4))
    # both legs share their vertical extent so the feet stay level for any shape
    for k in ("left_hip", "right_hip", "left_knee", "right_knee", "left_ankle", "right_ankle"):
        basis[names.index(k), 1, 4:] = 0.0
    # toes keep the ankle's height for every shape (flat feet)
    for k in ("left_foot", "right_foot"):
        basis[names.index(k), 1, :] = 0.0
    contact = tuple(names.index(k) for k in DEFAULT_CONTACT_JOINTS)
    return ParametricSkeleton(tuple(names), np.array(parents), offsets, basis, contact)


SKELETON_FORMAT = "proxymotion-skeleton"
SKELETON_VERSION = 1


def skeleton_to_dict(skel: ParametricSkeleton) -> dict:
    return {
        "format": SKELETON_FORMAT,
        "version": SKELETON_VERSION,
        "num_body_joints": skel.num_body_joints,
        "joints": [
            {
                "name": name,
                "parent": None if p < 0 else skel.names[p],
                "rest_offset": skel.rest_offset[i].tolist(),
                "shape_basis": skel.shape_basis[i].tolist(),
            }
            for i, (name, p) in enumerate(zip(skel.names, skel.parent))
        ],
        "contact_joints": [skel.names[j] for j in skel.contact_joint_ids],
    }


def skeleton_from_dict(doc: dict) -> ParametricSkeleton:
    if doc.get("format") != SKELETON_FORMAT:
        raise SkeletonError("format", f"not a skeleton document (format={doc.get('format')!r})")
    if doc.get("version") != SKELETON_VERSION:
        raise SkeletonError("version", f"unsupported version {doc.get('version')!r}")
    joints = doc["joints"]
    names = [j["name"] for j in joints]
    index = {n: i for i, n in enumerate(names)}
    parents = []
    for j in joints:
        if j["parent"] is None:
            parents.append(-1)
        elif j["parent"] in index:
            parents.append(index[j["parent"]])
        else:
            raise SkeletonError("parent", f"unknown parent {j['parent']!r} of {j['name']!r}")
    try:
        contact = [index[n] for n in doc.get("contact_joints", DEFAULT_CONTACT_JOINTS)]
    except KeyError as exc:
        raise SkeletonError("contact_joints", f"unknown joint {exc.args[0]!r}") from None
    return ParametricSkeleton(
        tuple(names),
        np.array(parents),
        np.array([j["rest_offset"] for j in joints], dtype=float),
        np.array([j["shape_basis"] for j in joints], dtype=float),
        tuple(contact),
        int(doc.get("num_body_joints", NUM_BODY_JOINTS)),
    )


def save_skeleton(skel: ParametricSkeleton, path) -> None:
    Path(path).write_text(json.dumps(skeleton_to_dict(skel), indent=1))


def load_skeleton(path) -> ParametricSkeleton:
    return skeleton_from_dict(json.loads(Path(path).read_text()))
