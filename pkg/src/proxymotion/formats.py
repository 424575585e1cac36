"""On-disk formats.

Motion files (``*.motion.jsonl``)
    Line 1 is a header object::

        {"magic": "proxymotion-motion", "version": 1, "fps": 60.0,
         "skeleton": "<digest or null>", "joint_names": [...],
         "beta": [10 floats], "num_frames": F}

    followed by one object per frame::

        {"frame": i, "theta": [[x, y, z] * 22], "t": [x, y, z],
         "g": [[[x, y, z] * 15] * 2]}

Trajectory files (``*.traj.jsonl``) store world-space joints::

        {"magic": "proxymotion-trajectory", "version": 1, "fps": ...,
         "joint_names": [...], "contact_ids": [...], "num_frames": F}
        {"frame": i, "joints": [[x, y, z] * J], "camera": {"R": ..., "T": ...}}

    ``camera`` is optional.

Proxy datasets are a ``.jsonl`` index plus a ``.bin`` sidecar. The index
header names the sidecar and its sha256; each following line describes one
sequence and refers to its arrays by section name. The sidecar uses the
weight-container layout (little-endian float64 arrays, length-prefixed
section table, trailing sha256).

Floats are written with ``repr`` precision so text round trips are exact.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .camera import CameraTrajectory, Intrinsics
from .coords import HumanCentricTrack
from .nn.weights_io import atomic_write_bytes, decode_weights, encode_weights
from .proxy import ProxySequence
from .skeleton import MotionSequence, ParametricSkeleton

MOTION_MAGIC = "proxymotion-motion"
TRAJ_MAGIC = "proxymotion-trajectory"
PROXY_MAGIC = "proxymotion-proxy"
VERSION = 1


class FormatError(ValueError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_jsonl(path, magic: str) -> Tuple[dict, List[dict]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise FormatError(f"{path}: empty file")
    try:
        rows = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON ({exc})") from exc
    head = rows[0]
    if head.get("magic") != magic:
        raise FormatError(f"{path}: expected magic {magic!r}, got {head.get('magic')!r}")
    if head.get("version") != VERSION:
        raise FormatError(f"{path}: unsupported version {head.get('version')!r}")
    return head, rows[1:]


# -- motions ---------------------------------------------------------------------------
def motion_to_text(motion: MotionSequence, skel: ParametricSkeleton = None) -> str:
    head = {"magic": MOTION_MAGIC, "version": VERSION, "fps": float(motion.fps),
            "skeleton": None if skel is None else skel.digest(),
            "joint_names": None if skel is None else list(skel.names),
            "beta": motion.beta.tolist(), "num_frames": len(motion)}
    lines = [_dumps(head)]
    for i in range(len(motion)):
        lines.append(_dumps({"frame": i, "theta": motion.theta[i].tolist(), "t": motion.t[i].tolist(),
                             "g": motion.g[i].tolist()}))
    return "\n".join(lines) + "\n"


def write_motion(path, motion: MotionSequence, skel: ParametricSkeleton = None) -> None:
    atomic_write_text(path, motion_to_text(motion, skel))


def read_motion(path, skel: ParametricSkeleton = None) -> Tuple[MotionSequence, dict]:
    head, rows = _read_jsonl(path, MOTION_MAGIC)
    if skel is not None and head.get("skeleton") not in (None, skel.digest()):
        raise FormatError(f"{path}: skeleton digest {head['skeleton']} does not match {skel.digest()}")
    if len(rows) != head.get("num_frames"):
        raise FormatError(f"{path}: header promises {head.get('num_frames')} frames, found {len(rows)}")
    try:
        theta = np.array([r["theta"] for r in rows], dtype=float)
        t = np.array([r["t"] for r in rows], dtype=float)
        g = np.array([r["g"] for r in rows], dtype=float)
        motion = MotionSequence(np.array(head["beta"], dtype=float), theta, t, g, float(head["fps"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: bad frame record ({exc})") from exc
    return motion, head


# -- trajectories ------------------------------------------------------------------------
def write_trajectory(path, joints, fps: float, joint_names: Sequence[str], contact_ids=(),
                     camera_R=None, camera_T=None, extra: dict = None) -> None:
    joints = np.asarray(joints, dtype=float)
    head = {"magic": TRAJ_MAGIC, "version": VERSION, "fps": float(fps), "joint_names": list(joint_names),
            "contact_ids": [int(c) for c in contact_ids], "num_frames": len(joints)}
    if extra:
        head.update(extra)
    lines = [_dumps(head)]
    for i in range(len(joints)):
        rec = {"frame": i, "joints": joints[i].tolist()}
        if camera_R is not None:
            rec["camera"] = {"R": np.asarray(camera_R[i]).tolist(), "T": np.asarray(camera_T[i]).tolist()}
        lines.append(_dumps(rec))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trajectory(path) -> Tuple[np.ndarray, dict]:
    head, rows = _read_jsonl(path, TRAJ_MAGIC)
    if len(rows) != head.get("num_frames"):
        raise FormatError(f"{path}: header promises {head.get('num_frames')} frames, found {len(rows)}")
    try:
        joints = np.array([r["joints"] for r in rows], dtype=float).reshape(len(rows), -1, 3)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad frame record ({exc})") from exc
    if len(head["joint_names"]) != joints.shape[1]:
        raise FormatError(f"{path}: {len(head['joint_names'])} joint names for {joints.shape[1]} joints")
    return joints, head


# -- proxy datasets -------------------------------------------------------------------------
_PROXY_ARRAYS = ("joints2d", "confidence", "contact", "beta", "g")
_TRACK_ARRAYS = ("theta_H", "t_H", "R_H", "T_H", "heading", "origin")


def encode_proxy_dataset(proxies: Sequence[ProxySequence], sidecar_name: str) -> Tuple[str, bytes]:
    arrays = OrderedDict()
    records = []
    for i, p in enumerate(proxies):
        key = f"seq{i:05d}"
        names = {}
        for a in _PROXY_ARRAYS:
            arrays[f"{key}/{a}"] = np.asarray(getattr(p, a), dtype=np.float64)
            names[a] = f"{key}/{a}"
        for a in _TRACK_ARRAYS:
            arrays[f"{key}/gt/{a}"] = np.asarray(getattr(p.canonical_gt, a), dtype=np.float64)
            names[f"gt/{a}"] = f"{key}/gt/{a}"
        arrays[f"{key}/camera/R"] = p.camera.R
        arrays[f"{key}/camera/T"] = p.camera.T
        names["camera/R"], names["camera/T"] = f"{key}/camera/R", f"{key}/camera/T"
        intr = p.camera.intrinsics
        records.append({
            "index": i, "source_id": p.source_id, "fps": float(p.fps), "num_frames": len(p),
            "intrinsics": {"focal": float(intr.focal), "principal_point": [float(x) for x in intr.principal_point],
                           "image_size": [float(x) for x in intr.image_size]},
            "keypoint_groups": None if p.keypoint_groups is None else [np.asarray(g).tolist()
                                                                        for g in p.keypoint_groups],
            "arrays": names,
        })
    blob = encode_weights(arrays)
    head = {"magic": PROXY_MAGIC, "version": VERSION, "sidecar": sidecar_name,
            "sidecar_sha256": hashlib.sha256(blob).hexdigest(), "num_sequences": len(proxies)}
    text = "\n".join([_dumps(head)] + [_dumps(r) for r in records]) + "\n"
    return text, blob


def write_proxy_dataset(path, proxies: Sequence[ProxySequence]) -> Tuple[Path, Path]:
    """Write ``path`` (jsonl index) and ``path`` with suffix ``.bin``; returns both."""
    path = Path(path)
    side = path.with_suffix(".bin")
    text, blob = encode_proxy_dataset(proxies, side.name)
    atomic_write_bytes(side, blob)
    atomic_write_text(path, text)
    return path, side


def read_proxy_dataset(path) -> List[ProxySequence]:
    path = Path(path)
    head, rows = _read_jsonl(path, PROXY_MAGIC)
    side = path.parent / head["sidecar"]
    try:
        blob = side.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read sidecar {side}: {exc}") from exc
    if hashlib.sha256(blob).hexdigest() != head["sidecar_sha256"]:
        raise FormatError(f"{side}: sidecar checksum does not match the index")
    arrays = decode_weights(blob)
    out = []
    for r in rows:
        a = {k: arrays[v] for k, v in r["arrays"].items()}
        intr = Intrinsics(r["intrinsics"]["focal"], tuple(r["intrinsics"]["principal_point"]),
                          tuple(r["intrinsics"]["image_size"]))
        track = HumanCentricTrack(*(a[f"gt/{k}"] for k in _TRACK_ARRAYS))
        groups = None if r["keypoint_groups"] is None else tuple(np.array(g, dtype=int)
                                                                 for g in r["keypoint_groups"])
        out.append(ProxySequence(a["joints2d"], a["confidence"], a["contact"],
                                 CameraTrajectory(intr, a["camera/R"], a["camera/T"]), r["source_id"], track,
                                 a["beta"], a["g"], r["fps"], groups))
    return out


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def list_motion_files(folder) -> List[Path]:
    folder = Path(folder)
    if folder.is_file():
        return [folder]
    return sorted(p for p in folder.iterdir() if p.name.endswith(".jsonl") and not p.name.startswith("."))


__all__ = ["FormatError", "atomic_write_text", "file_digest", "list_motion_files", "read_motion",
           "read_proxy_dataset", "read_trajectory", "write_motion", "write_proxy_dataset", "write_trajectory"]
