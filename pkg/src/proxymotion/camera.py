"""Pinhole cameras and randomized virtual camera trajectories.

Camera frames follow the computer-vision convention: x right, y down, z along
the optical axis. Extrinsics map world points into the camera frame,
``p_cam = R @ p + T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from . import rotations

DEFAULT_IMAGE_SIZE = (1920.0, 1080.0)


@dataclass(frozen=True)
class Intrinsics:
    focal: float
    principal_point: tuple
    image_size: tuple = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        if not self.focal > 0:
            raise ValueError(f"focal must be positive, got {self.focal}")

    @property
    def fov_deg(self) -> float:
        """Vertical field of view."""
        return float(np.degrees(2.0 * np.arctan(0.5 * self.image_size[1] / self.focal)))

    @classmethod
    def from_fov(cls, fov_deg: float, image_size=DEFAULT_IMAGE_SIZE) -> "Intrinsics":
        w, h = image_size
        focal = 0.5 * h / np.tan(0.5 * np.radians(fov_deg))
        return cls(float(focal), (0.5 * w, 0.5 * h), (float(w), float(h)))

    def matrix(self) -> np.ndarray:
        return np.array([[self.focal, 0.0, self.principal_point[0]],
                         [0.0, self.focal, self.principal_point[1]],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Extrinsics:
    R: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        T = np.asarray(self.T, dtype=float)
        if R.shape != (3, 3) or T.shape != (3,):
            raise ValueError(f"expected R (3, 3) and T (3,), got {R.shape} and {T.shape}")
        if not rotations.is_rotation(R, 1e-9):
            raise ValueError("R is not a proper rotation")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)

    @property
    def center(self) -> np.ndarray:
        return -self.R.T @ self.T

    @property
    def forward(self) -> np.ndarray:
        """Optical axis expressed in world coordinates."""
        return self.R[2].copy()

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))


@dataclass(eq=False)
class CameraTrajectory:
    """Per-frame extrinsics (R: (F, 3, 3), T: (F, 3)) with shared intrinsics."""

    intrinsics: Intrinsics
    R: np.ndarray
    T: np.ndarray
    distance: np.ndarray = field(default=None)
    height: np.ndarray = field(default=None)

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.T = np.asarray(self.T, dtype=float)
        if self.R.shape != (len(self.T), 3, 3) or self.T.shape[1:] != (3,):
            raise ValueError(f"inconsistent trajectory shapes {self.R.shape} / {self.T.shape}")

    def __len__(self) -> int:
        return len(self.T)

    def __getitem__(self, i: int) -> Extrinsics:
        return Extrinsics(self.R[i], self.T[i])

    @property
    def centers(self) -> np.ndarray:
        return -np.einsum("fji,fj->fi", self.R, self.T)


def project(points, intr: Intrinsics, extr_R, extr_T=None):
    """Perspective projection of (..., N, 3) points.

    `extr_R` may be an :class:`Extrinsics` (then `extr_T` is ignored) or a
    rotation array broadcastable against the points' leading axes. Returns
    ``(uv, valid)`` where `valid` flags points with positive camera depth;
    pixels of invalid points are NaN.
    """
    if isinstance(extr_R, Extrinsics):
        extr_R, extr_T = extr_R.R, extr_R.T
    points = np.asarray(points, dtype=float)
    R = np.asarray(extr_R, dtype=float)
    T = np.asarray(extr_T, dtype=float)
    cam = np.einsum("...ij,...nj->...ni", R, points) + T[..., None, :]
    z = cam[..., 2]
    valid = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        xy = cam[..., :2] / np.where(valid, z, np.nan)[..., None]
    uv = intr.focal * xy + np.asarray(intr.principal_point)
    return uv, valid


def lift(uv, depth, intr: Intrinsics, extr: Extrinsics) -> np.ndarray:
    """Back-project pixels at the given camera depths to world points."""
    uv = np.asarray(uv, dtype=float)
    depth = np.asarray(depth, dtype=float)
    xy = (uv - np.asarray(intr.principal_point)) / intr.focal
    cam = np.concatenate([xy * depth[..., None], depth[..., None]], axis=-1)
    return np.einsum("ji,...j->...i", extr.R, cam - extr.T)


def look_at(position, target, up=(0.0, 1.0, 0.0)) -> Extrinsics:
    """Camera at `position` whose optical axis passes through `target`."""
    position = np.asarray(position, dtype=float)
    z = np.asarray(target, dtype=float) - position
    z /= np.linalg.norm(z)
    down = -np.asarray(up, dtype=float)
    x = np.cross(down, z)
    norm = np.linalg.norm(x)
    if norm < 1e-9:
        raise ValueError("look-at direction is parallel to the up axis")
    x /= norm
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return Extrinsics(R, -R @ position)


@dataclass(frozen=True)
class CameraRanges:
    fov_deg: tuple = (30.0, 90.0)
    distance: tuple = (1.0, 5.0)
    height: tuple = (0.5, 2.0)

    def __post_init__(self):
        for name in ("fov_deg", "distance", "height"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"empty {name} range ({lo}, {hi})")


def sample_fov(rng: np.random.Generator, ranges: CameraRanges = CameraRanges(), size=None):
    return rng.uniform(*ranges.fov_deg, size=size)


def sample_trajectory(rng_seed, num_frames: int, subject_centroid_track, *, fps: float = 60.0,
                      num_waypoints: int = 4, ranges: CameraRanges = CameraRanges(),
                      image_size=DEFAULT_IMAGE_SIZE, follow: bool = True) -> CameraTrajectory:
    """Sample one moving virtual camera watching a subject.

    The vertical FOV, the camera's horizontal distance to the (1 s box-filtered)
    subject track and its height above the ground are drawn uniformly from
    `ranges` at `num_waypoints` waypoints and linearly blended in between, so
    every frame stays inside the ranges. Each frame looks at the smoothed track.
    With ``follow=False`` the camera stands still and looks at the track mean.
    """
    if num_frames < 1:
        raise ValueError("num_frames must be >= 1")
    rng = np.random.default_rng(rng_seed)
    track = np.asarray(subject_centroid_track, dtype=float).reshape(num_frames, 3)
    intr = Intrinsics.from_fov(float(sample_fov(rng, ranges)), image_size)

    k = max(int(num_waypoints), 1)
    dist_w = rng.uniform(*ranges.distance, size=k)
    height_w = rng.uniform(*ranges.height, size=k)
    azim_w = rng.uniform(0.0, 2.0 * np.pi, size=k)
    # keep consecutive azimuths on the short arc
    azim_w = np.unwrap(azim_w)

    if follow:
        size = max(1, int(round(fps)))
        smooth = uniform_filter1d(track, size=min(size, num_frames), axis=0, mode="nearest")
    else:
        smooth = np.broadcast_to(track.mean(axis=0), track.shape).copy()
        k = 1
    s = np.linspace(0.0, k - 1, num_frames) if k > 1 else np.zeros(num_frames)
    knots = np.arange(k)
    dist = np.interp(s, knots, dist_w[:k])
    height = np.interp(s, knots, height_w[:k])
    azim = np.interp(s, knots, azim_w[:k])

    pos = np.empty((num_frames, 3))
    pos[:, 0] = smooth[:, 0] + dist * np.sin(azim)
    pos[:, 1] = height
    pos[:, 2] = smooth[:, 2] + dist * np.cos(azim)
    R = np.empty((num_frames, 3, 3))
    T = np.empty((num_frames, 3))
    for f in range(num_frames):
        ex = look_at(pos[f], smooth[f])
        R[f], T[f] = ex.R, ex.T
    return CameraTrajectory(intr, R, T, distance=dist, height=height)


def static_trajectory(intr: Intrinsics, extr: Extrinsics, num_frames: int) -> CameraTrajectory:
    R = np.broadcast_to(extr.R, (num_frames, 3, 3)).copy()
    T = np.broadcast_to(extr.T, (num_frames, 3)).copy()
    return CameraTrajectory(intr, R, T)
