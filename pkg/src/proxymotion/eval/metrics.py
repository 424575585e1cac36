"""World-space motion metrics: aligned MPJPE variants, acceleration error and
foot-ground contact statistics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..proxy import ContactParams, contacts_from_joints

DEFAULT_THRESHOLDS = (0.01, 0.015, 0.02, 0.025, 0.03)


class DegenerateAlignmentError(ValueError):
    pass


@dataclass
class Similarity:
    scale: float
    R: np.ndarray
    t: np.ndarray

    def apply(self, X) -> np.ndarray:
        return self.scale * np.asarray(X) @ self.R.T + self.t


def procrustes(X, Y, with_scale: bool = False, tol: float = 1e-9) -> Similarity:
    """Least-squares ``s R X + t ~ Y`` for (N, 3) correspondences, det R = +1.

    Needs at least three non-collinear points in X; otherwise a
    :class:`DegenerateAlignmentError` reports the singular-value ratio.
    """
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    Y = np.asarray(Y, dtype=float).reshape(-1, 3)
    if X.shape != Y.shape:
        raise ValueError(f"point sets differ in shape: {X.shape} vs {Y.shape}")
    if len(X) < 3:
        raise DegenerateAlignmentError(f"need >= 3 correspondences, got {len(X)}")
    mx, my = X.mean(0), Y.mean(0)
    Xc, Yc = X - mx, Y - my
    sx = np.linalg.svd(Xc, compute_uv=False)
    ratio = sx[1] / sx[0] if sx[0] > 0 else 0.0
    if ratio < tol:
        raise DegenerateAlignmentError(
            f"source points are collinear or coincident (singular values {sx[0]:.3g}, {sx[1]:.3g}; "
            f"ratio {ratio:.3g} < {tol:g})")
    U, S, Vt = np.linalg.svd(Yc.T @ Xc)
    D = np.ones(3)
    D[2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    R = U @ np.diag(D) @ Vt
    s = float((S * D).sum() / (Xc ** 2).sum()) if with_scale else 1.0
    return Similarity(s, R, my - s * R @ mx)


def _mpjpe_mm(a, b) -> float:
    return float(np.linalg.norm(a - b, axis=-1).mean() * 1000.0)


def w_mpjpe(pred, gt, with_scale: bool = False) -> float:
    """Error after the rigid transform that best aligns frame 0."""
    tr = procrustes(pred[0], gt[0], with_scale)
    return _mpjpe_mm(tr.apply(pred), gt)


def wa_mpjpe(pred, gt, with_scale: bool = False) -> float:
    """Error after one transform fitted to the whole trajectory."""
    tr = procrustes(pred.reshape(-1, 3), gt.reshape(-1, 3), with_scale)
    return _mpjpe_mm(tr.apply(pred), gt)


def pa_mpjpe(pred, gt, with_scale: bool = False, mode: str = "procrustes", root: int = 0) -> float:
    """Per-frame alignment; ``mode="gt_root"`` substitutes the GT root position instead."""
    if mode == "gt_root":
        aligned = pred - pred[:, root:root + 1] + gt[:, root:root + 1]
        return _mpjpe_mm(aligned, gt)
    if mode != "procrustes":
        raise ValueError(f"unknown PA mode {mode!r}")
    aligned = np.stack([procrustes(p, g, with_scale).apply(p) for p, g in zip(pred, gt)])
    return _mpjpe_mm(aligned, gt)


def accel_error(pred, gt, fps: float) -> Optional[float]:
    """Mean second-difference error in mm/s^2; None below 3 frames."""
    if len(pred) < 3:
        return None
    ap = pred[2:] - 2 * pred[1:-1] + pred[:-2]
    ag = gt[2:] - 2 * gt[1:-1] + gt[:-2]
    return float(np.linalg.norm(ap - ag, axis=-1).mean() * fps ** 2 * 1000.0)


def ground_penetration(contact_heights, threshold: float) -> float:
    """Percentage of frames where any contact joint lies below ``-threshold``."""
    h = np.asarray(contact_heights, dtype=float)
    return 100.0 * int(np.count_nonzero(np.any(h < -threshold, axis=1))) / len(h)


def foot_floating(contact_heights, gt_contact, threshold: float) -> float:
    """Percentage of frames with a GT-planted joint farther than `threshold` from the ground."""
    h = np.asarray(contact_heights, dtype=float)
    planted = np.asarray(gt_contact) >= 0.5
    return 100.0 * int(np.count_nonzero(np.any(planted & (np.abs(h) > threshold), axis=1))) / len(h)


@dataclass
class MetricsReport:
    w_mpjpe: float
    wa_mpjpe: float
    pa_mpjpe: float
    accel: Optional[float]
    thresholds: List[float]
    gp: List[float]
    ff: List[float]
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def sweep_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold_m", "gp_percent", "ff_percent"])
        for row in zip(self.thresholds, self.gp, self.ff):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def metric_suite(pred_world, gt_world, fps: float, contact_ids: Sequence[int] = (7, 8, 10, 11),
                 thresholds: Sequence[float] = DEFAULT_THRESHOLDS, gt_contact=None,
                 contact_params: ContactParams = ContactParams(), with_scale: bool = False,
                 pa_mode: str = "procrustes") -> MetricsReport:
    """All world-space metrics for one sequence of (F, J, 3) joints in meters.

    GT contact defaults to the continuous labels of the GT joints, binarized
    at 0.5.
    """
    pred = np.asarray(pred_world, dtype=float)
    gt = np.asarray(gt_world, dtype=float)
    if pred.shape != gt.shape or pred.ndim != 3 or pred.shape[-1] != 3:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} must both be (F, J, 3)")
    if fps <= 0:
        raise ValueError("fps must be positive")
    notes = []
    ids = list(contact_ids)
    if gt_contact is None:
        gt_contact = contacts_from_joints(gt, fps, ids, contact_params)
    heights = pred[:, ids, 1]
    # rigid offsets between the two world frames are not acceleration errors
    accel = accel_error(procrustes(pred.reshape(-1, 3), gt.reshape(-1, 3), with_scale).apply(pred), gt, fps) \
        if len(pred) >= 3 else None
    if accel is None:
        notes.append("accel undefined for fewer than 3 frames")
    return MetricsReport(
        w_mpjpe=w_mpjpe(pred, gt, with_scale),
        wa_mpjpe=wa_mpjpe(pred, gt, with_scale),
        pa_mpjpe=pa_mpjpe(pred, gt, with_scale, pa_mode),
        accel=accel,
        thresholds=[float(t) for t in thresholds],
        gp=[ground_penetration(heights, t) for t in thresholds],
        ff=[foot_floating(heights, gt_contact, t) for t in thresholds],
        notes=notes,
    )
