"""Proxy-to-motion network: a sequential initializer and a learned descent refiner.

The initializer reads an odd-length window of 2D keypoints and predicts the
human-centric state of the center frame. Body and hand keypoints go through
separate stacks of partial dilated convolutions, exchange information by
cross-attention, and are collapsed to one feature each; their concatenation
F_seq feeds the output heads.

The descent loop refines that state. Each iteration measures how far the
state is from the observations (reprojection residual S_proj and contact
residual S_contact), turns the residuals into query tokens and the state
into key/value tokens, and decodes an additive update from the attended
tokens.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import rotations
from .camera import Intrinsics
from .eval.losses import Estimate, LossWeights, Targets, indicator_loss, loss_desc, loss_rec
from .nn import functional as F
from .nn.kinematics import forward_kinematics
from .nn.layers import CrossAttention, Linear, Module, PartialConv1d
from .nn.optim import make_optimizer
from .nn.tensor import Tensor, as_tensor, concat, matmul, no_grad, relu, sigmoid, stack, where_const
from .proxy import ProxySequence, mask_failures
from .skeleton import NUM_BETAS, ParametricSkeleton, forward_kinematics_arrays

STATE_FIELDS = ("beta", "theta", "t", "R6", "T")
IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


class NoObservationsError(ValueError):
    pass


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class NetConfig:
    window: int = 81
    hidden: int = 64
    kernel_size: int = 3
    dilations: tuple = (1, 3, 9, 27)
    num_body_joints: int = 22
    num_hand_joints: int = 15
    body_keypoints: tuple = tuple(range(22))
    hand_keypoints: tuple = tuple(range(22, 52))
    contact_ids: tuple = (7, 8, 10, 11)
    descent_tokens: int = 8
    descent_dim: int = 32
    iterations: int = 3
    residual: str = "value"
    fuse: str = "concat"
    keypoint_map: Optional[list] = None

    def __post_init__(self):
        if self.window % 2 == 0:
            raise ValueError("window length must be odd")
        span = 1 + (self.kernel_size - 1) * sum(self.dilations)
        if span != self.window:
            raise ValueError(f"dilations {self.dilations} with kernel {self.kernel_size} cover {span} frames, "
                             f"window is {self.window}")
        if self.fuse not in ("concat", "sum"):
            raise ValueError(f"unknown fusion {self.fuse!r}")
        self.dilations = tuple(self.dilations)
        self.body_keypoints = tuple(self.body_keypoints)
        self.hand_keypoints = tuple(self.hand_keypoints)
        self.contact_ids = tuple(self.contact_ids)

    @property
    def num_keypoints(self) -> int:
        return len(self.body_keypoints) + len(self.hand_keypoints)

    @property
    def num_contacts(self) -> int:
        return len(self.contact_ids)

    @property
    def feature_dim(self) -> int:
        return 2 * self.hidden if self.fuse == "concat" else self.hidden

    @property
    def head_sizes(self) -> Dict[str, int]:
        return {"beta": NUM_BETAS, "theta": 3 * self.num_body_joints, "t": 3, "R6": 6, "T": 3,
                "g": 6 * self.num_hand_joints}

    @property
    def state_dim(self) -> int:
        return NUM_BETAS + 3 * self.num_body_joints + 12


# -- inputs ---------------------------------------------------------------------------
@dataclass
class WindowInput:
    """One window of observations centred on the frame to predict.

    joints2d holds image coordinates scaled to [-1, 1] by the image size.
    prev_contact gives the previous frame's contact joints in the current
    frame's human coordinates (used for the contact residual).
    """

    joints2d: np.ndarray
    confidence: np.ndarray
    intrinsics: Intrinsics
    prev_contact: Optional[np.ndarray] = None
    fps: float = 60.0

    def __post_init__(self):
        self.joints2d = np.asarray(self.joints2d, dtype=float)
        self.confidence = np.asarray(self.confidence, dtype=float)
        n = len(self.joints2d)
        if n % 2 == 0:
            raise ValueError("window length must be odd")
        if self.confidence.shape != self.joints2d.shape[:2]:
            raise ValueError("confidence must be (L, J)")

    @property
    def center(self) -> int:
        return len(self.joints2d) // 2

    @classmethod
    def from_proxy(cls, proxy: ProxySequence, center: int, window: int = 81, prev_contact=None) -> "WindowInput":
        half = window // 2
        if center - half < 0 or center + half >= len(proxy):
            raise ValueError(f"window of {window} frames around {center} exceeds the {len(proxy)}-frame sequence")
        sl = slice(center - half, center + half + 1)
        intr = proxy.camera.intrinsics
        return cls(normalize_pixels(proxy.joints2d[sl], intr, proxy.confidence[sl]), proxy.confidence[sl].copy(),
                   intr, prev_contact, proxy.fps)


def normalize_pixels(uv, intr: Intrinsics, confidence=None) -> np.ndarray:
    size = np.asarray(intr.image_size, dtype=float)
    out = 2.0 * np.asarray(uv, dtype=float) / size - 1.0
    if confidence is not None:
        out = np.where(np.asarray(confidence)[..., None] > 0, out, 0.0)
    return out


def focal_coordinates(normalized, intr: Intrinsics) -> np.ndarray:
    """Normalized [-1, 1] image coordinates to focal-normalized camera coordinates."""
    size = np.asarray(intr.image_size, dtype=float)
    return ((np.asarray(normalized) + 1.0) * 0.5 * size - np.asarray(intr.principal_point)) / intr.focal


@dataclass
class WindowBatch:
    joints2d: np.ndarray       # B, L, K, 2
    confidence: np.ndarray     # B, L, K
    obs: np.ndarray            # B, K, 2 focal-normalized centre frame
    obs_conf: np.ndarray       # B, K
    prev_contact: np.ndarray   # B, C, 3 (NaN when unknown)
    fps: float = 60.0

    def __len__(self) -> int:
        return len(self.joints2d)


def stack_windows(windows: Sequence[WindowInput], num_contacts: int = 4) -> WindowBatch:
    j2d = np.stack([w.joints2d for w in windows])
    conf = np.stack([w.confidence for w in windows])
    obs = np.stack([focal_coordinates(w.joints2d[w.center], w.intrinsics) for w in windows])
    oc = conf[:, windows[0].center]
    prev = np.stack([np.full((num_contacts, 3), np.nan) if w.prev_contact is None
                     else np.asarray(w.prev_contact, dtype=float) for w in windows])
    return WindowBatch(j2d, conf, np.where(oc[..., None] > 0, obs, 0.0), oc, prev, windows[0].fps)


# -- prediction containers ---------------------------------------------------------------
@dataclass
class InitialPrediction:
    beta: Tensor
    theta: Tensor
    t: Tensor
    R6: Tensor
    T: Tensor
    g: Tensor
    ind: Tensor
    F_seq: Tensor
    features: Tensor

    @property
    def R_H(self) -> Tensor:
        return F.rot6d_to_matrix(self.R6)


@dataclass
class DescentState:
    beta: Tensor
    theta: Tensor
    t: Tensor
    R6: Tensor
    T: Tensor
    g: Tensor
    F_seq: Tensor
    ind: Tensor
    S_proj: Optional[Tensor] = None
    S_contact: Optional[Tensor] = None
    joints: Optional[Tensor] = None
    proj: Optional[Tensor] = None

    @classmethod
    def from_init(cls, init: InitialPrediction) -> "DescentState":
        return cls(init.beta, init.theta, init.t, init.R6, init.T, init.g, init.F_seq, init.ind)

    def vector(self) -> Tensor:
        b = self.t.shape[0]
        return concat([self.beta, self.theta.reshape(b, -1), self.t, self.R6, self.T], axis=1)

    def numpy(self) -> Dict[str, np.ndarray]:
        return {k: getattr(self, k).data.copy() for k in STATE_FIELDS + ("g", "ind")}

    def estimate(self) -> Estimate:
        return Estimate(self.beta, self.theta, self.t, self.R6, self.T, self.joints, self.proj, self.g, self.ind)


def orthonormalize_6d(r6) -> Tensor:
    return F.matrix_to_rot6d(F.rot6d_to_matrix(r6))


# -- networks ------------------------------------------------------------------------
class _Stream(Module):
    def __init__(self, channels: int, cfg: NetConfig, rng):
        super().__init__()
        self.n = len(cfg.dilations) - 1
        c = channels
        for i, d in enumerate(cfg.dilations[:-1]):
            setattr(self, f"conv{i}", PartialConv1d(c, cfg.hidden, cfg.kernel_size, d, rng))
            c = cfg.hidden
        self.final = PartialConv1d(cfg.hidden, cfg.hidden, cfg.kernel_size, cfg.dilations[-1], rng)

    def encode(self, x, mask):
        for i in range(self.n):
            x, mask = getattr(self, f"conv{i}")(x, mask)
            x = relu(x)
        return x, mask

    def collapse(self, tokens, mask):
        y, _ = self.final(tokens, mask)
        return relu(y.reshape(y.shape[0], -1))


class InitNetwork(Module):
    def __init__(self, cfg: NetConfig = NetConfig(), seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        h = cfg.hidden
        self.body = _Stream(2 * len(cfg.body_keypoints), cfg, rng)
        self.hand = _Stream(2 * len(cfg.hand_keypoints), cfg, rng)
        self.attn_body = CrossAttention(h, h, h, rng, cfg.residual)
        self.attn_hand = CrossAttention(h, h, h, rng, cfg.residual)
        self.trunk = Linear(cfg.feature_dim, h, rng)
        self.head = Linear(h, sum(cfg.head_sizes.values()), rng)
        self.head_ind = Linear(h, cfg.num_contacts, rng)

    @staticmethod
    def _stream_input(batch: WindowBatch, idx):
        idx = list(idx)
        x = batch.joints2d[:, :, idx, :]                     # B, L, K, 2
        b, n = x.shape[:2]
        x = x.reshape(b, n, -1).transpose(0, 2, 1)
        m = np.repeat(batch.confidence[:, :, idx] > 0, 2, axis=2).transpose(0, 2, 1)
        return x, m

    def forward(self, batch: WindowBatch) -> InitialPrediction:
        cfg = self.cfg
        if batch.joints2d.shape[1] != cfg.window:
            raise ValueError(f"window has {batch.joints2d.shape[1]} frames, network expects {cfg.window}")
        empty = ~np.any(batch.confidence > 0, axis=(1, 2))
        if empty.any():
            raise NoObservationsError(f"no observations in window(s) {np.flatnonzero(empty).tolist()}")
        xb, mb = self._stream_input(batch, cfg.body_keypoints)
        xh, mh = self._stream_input(batch, cfg.hand_keypoints)
        fb, mb = self.body.encode(xb, mb)
        fh, mh = self.hand.encode(xh, mh)
        tb, th = fb.transpose(0, 2, 1), fh.transpose(0, 2, 1)
        tb2 = self.attn_body(tb, th)
        th2 = self.attn_hand(th, tb)
        zb = self.body.collapse(tb2.transpose(0, 2, 1), mb)
        zh = self.hand.collapse(th2.transpose(0, 2, 1), mh)
        F_seq = concat([zb, zh], axis=1) if cfg.fuse == "concat" else zb + zh
        z = relu(self.trunk(F_seq))
        out = self.head(z)
        parts, start = {}, 0
        for name, size in cfg.head_sizes.items():
            parts[name] = out[:, start:start + size]
            start += size
        b = len(batch)
        return InitialPrediction(
            beta=parts["beta"],
            theta=parts["theta"].reshape(b, cfg.num_body_joints, 3),
            t=parts["t"],
            R6=orthonormalize_6d(parts["R6"] + IDENTITY_6D),
            T=parts["T"],
            g=parts["g"].reshape(b, 2, cfg.num_hand_joints, 3),
            ind=self.indicator(z),
            F_seq=F_seq,
            features=z,
        )

    def indicator(self, features) -> Tensor:
        return sigmoid(self.head_ind(features))


class DescentNetwork(Module):
    """Maps (state, deviation) to additive state updates through cross-attention."""

    def __init__(self, cfg: NetConfig = NetConfig(), seed=1):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        n, d = cfg.descent_tokens, cfg.descent_dim
        self.state_fc = Linear(cfg.state_dim + cfg.feature_dim, n * d, rng)
        self.dev_fc = Linear(2 * cfg.num_keypoints + 3 * cfg.num_contacts, n * d, rng)
        self.attn = CrossAttention(d, d, d, rng, cfg.residual)
        self.head = Linear(n * d, cfg.state_dim, rng)

    def forward(self, state: DescentState, S_proj, S_contact) -> Dict[str, Tensor]:
        cfg = self.cfg
        b = state.t.shape[0]
        n, d = cfg.descent_tokens, cfg.descent_dim
        s = concat([state.vector(), state.F_seq], axis=1)
        dev = concat([as_tensor(S_proj).reshape(b, -1), as_tensor(S_contact).reshape(b, -1)], axis=1)
        kv = relu(self.state_fc(s)).reshape(b, n, d)
        q = relu(self.dev_fc(dev)).reshape(b, n, d)
        mixed = self.attn(kv, q).reshape(b, n * d)
        delta = self.head(mixed)
        nt = 3 * cfg.num_body_joints
        off = NUM_BETAS
        return {"beta": delta[:, :off],
                "theta": delta[:, off:off + nt].reshape(b, cfg.num_body_joints, 3),
                "t": delta[:, off + nt:off + nt + 3],
                "R6": delta[:, off + nt + 3:off + nt + 9],
                "T": delta[:, off + nt + 9:off + nt + 12]}


class OracleRefiner:
    """Steps a fixed fraction of the way to known ground-truth states."""

    def __init__(self, gt: Dict[str, np.ndarray], step: float = 0.5):
        self.gt = gt
        self.step = step

    def __call__(self, state: DescentState, S_proj, S_contact) -> Dict[str, np.ndarray]:
        return {k: self.step * (self.gt[k] - getattr(state, k).data) for k in STATE_FIELDS}


# -- residuals -------------------------------------------------------------------------
@dataclass
class MisalignmentInfo:
    behind_camera: np.ndarray   # B, count of joints with non-positive depth
    unobserved: np.ndarray      # B, True when no centre-frame keypoint is observed


def keypoints_from_joints(joints, keypoint_map=None) -> Tensor:
    joints = as_tensor(joints)
    if keypoint_map is None:
        return joints
    return matmul(Tensor(np.asarray(keypoint_map, dtype=float)), joints)


def misalignment(J3d, R_H, T_H, obs, obs_conf):
    """Focal-normalized reprojection residual with masked entries zeroed.

    J3d (B, K, 3) keypoints in human space, camera (R_H, T_H), observations
    (B, K, 2) in focal-normalized coordinates with confidence (B, K).
    Returns ``(S_proj, projected, info)``; keypoints behind the camera are
    zeroed and counted in `info`.
    """
    proj, valid = F.project_normalized(J3d, R_H, T_H)
    keep = valid & (np.asarray(obs_conf) > 0)
    S = where_const(keep[..., None], proj - np.asarray(obs))
    info = MisalignmentInfo((~valid).sum(axis=-1), ~np.any(np.asarray(obs_conf) > 0, axis=-1))
    return S, proj, info


def contact_status(J3d, prev_contact, ind, fps: float, contact_ids=(7, 8, 10, 11)) -> Tensor:
    """``ind * (v_x, v_z, d_y)`` per contact joint, shape (B, C, 3).

    Velocity is the backward difference to `prev_contact`; rows with an
    unknown (NaN) previous position get zero velocity.
    """
    J3d = as_tensor(J3d)
    cur = stack([J3d[:, j] for j in contact_ids], axis=1)
    prev = np.asarray(prev_contact, dtype=float)
    prev = np.where(np.isnan(prev), cur.data, prev)
    vel = (cur - prev) * fps
    raw = stack([vel[..., 0], vel[..., 2], cur[..., 1]], axis=-1)
    return raw * as_tensor(ind).reshape(*ind.shape, 1)


# -- descent ----------------------------------------------------------------------------
@dataclass
class DescentResult:
    state: DescentState
    trace: List[DescentState]
    aborted: bool = False
    info: List[MisalignmentInfo] = field(default_factory=list)


def _evaluate(state: DescentState, skel: ParametricSkeleton, batch: WindowBatch, cfg: NetConfig):
    joints = forward_kinematics(skel, state.beta, state.theta, state.t, state.g)
    kp = keypoints_from_joints(joints, cfg.keypoint_map)
    S_proj, proj, info = misalignment(kp, F.rot6d_to_matrix(state.R6), state.T, batch.obs, batch.obs_conf)
    S_contact = contact_status(joints, batch.prev_contact, state.ind, batch.fps, cfg.contact_ids)
    return replace(state, S_proj=S_proj, S_contact=S_contact, joints=joints, proj=proj), info


def _finite(delta: Dict) -> bool:
    return all(np.all(np.isfinite(as_tensor(v).data)) for v in delta.values())


def descend(init, batch: WindowBatch, skel: ParametricSkeleton, refiner: Callable,
            iterations: int = 3, cfg: NetConfig = None) -> DescentResult:
    """Run the refiner `iterations` times; the trace holds every intermediate state.

    A non-finite update stops the loop; the last finite state is returned
    with ``aborted=True``.
    """
    cfg = cfg or getattr(refiner, "cfg", None) or NetConfig()
    state = DescentState.from_init(init) if isinstance(init, InitialPrediction) else init
    state, info = _evaluate(state, skel, batch, cfg)
    trace, infos = [state], [info]
    aborted = False
    for _ in range(iterations):
        delta = refiner(state, state.S_proj, state.S_contact)
        if not _finite(delta):
            aborted = True
            break
        upd = {k: getattr(state, k) + delta[k] for k in STATE_FIELDS}
        upd["R6"] = orthonormalize_6d(upd["R6"])
        nxt = replace(state, **upd)
        if not all(np.all(np.isfinite(getattr(nxt, k).data)) for k in STATE_FIELDS):
            aborted = True
            break
        state, info = _evaluate(nxt, skel, batch, cfg)
        trace.append(state)
        infos.append(info)
    return DescentResult(state, trace, aborted, infos)


def init_network(weights: InitNetwork, window: WindowInput) -> InitialPrediction:
    """Single-window convenience wrapper around :meth:`InitNetwork.forward`."""
    return weights(stack_windows([window], weights.cfg.num_contacts))


# -- training data -----------------------------------------------------------------------
def _prev_in_current(track, joints_h: np.ndarray, ids) -> np.ndarray:
    """Contact joints of frame f-1 expressed in the human frame of frame f."""
    n = len(joints_h)
    cur = joints_h[:, ids]
    world = np.einsum("fji,fcj->fci", track.heading, cur) + track.origin[:, None]
    prev = np.empty_like(cur)
    prev[0] = cur[0]
    prev[1:] = np.einsum("fij,fcj->fci", track.heading[1:], world[:-1] - track.origin[1:, None])
    return prev if n else cur


@dataclass
class SequenceLabels:
    proxy: ProxySequence
    joints2d: np.ndarray
    confidence: np.ndarray
    obs: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    t: np.ndarray
    R6: np.ndarray
    T: np.ndarray
    g: np.ndarray
    joints: np.ndarray
    proj: np.ndarray
    contact: np.ndarray
    prev_contact: np.ndarray


def sequence_labels(skel: ParametricSkeleton, proxy: ProxySequence, keypoint_map=None) -> SequenceLabels:
    """Per-frame network inputs and human-centric targets for one proxy."""
    gt = proxy.canonical_gt
    n = len(proxy)
    beta = np.broadcast_to(proxy.beta, (n, NUM_BETAS)).copy()
    joints = forward_kinematics_arrays(skel, proxy.beta, gt.theta_H, gt.t_H, proxy.g)
    kp = joints if keypoint_map is None else np.einsum("kj,fjc->fkc", np.asarray(keypoint_map), joints)
    cam = np.einsum("fij,fkj->fki", gt.R_H, kp) + gt.T_H[:, None]
    proj = cam[..., :2] / cam[..., 2:3]
    intr = proxy.camera.intrinsics
    j2d = normalize_pixels(proxy.joints2d, intr, proxy.confidence)
    obs = np.where(proxy.confidence[..., None] > 0, focal_coordinates(j2d, intr), 0.0)
    ids = list(skel.contact_joint_ids)
    return SequenceLabels(proxy, j2d, proxy.confidence.copy(), obs, beta, gt.theta_H.copy(), gt.t_H.copy(),
                          rotations.matrix_to_rot6d(gt.R_H), gt.T_H.copy(), proxy.g.copy(), joints, proj,
                          proxy.contact.copy(), _prev_in_current(gt, joints, ids))


class WindowDataset:
    """Proxies grouped by source motion, sampled as views x consecutive frames."""

    def __init__(self, skel: ParametricSkeleton, proxies: Sequence[ProxySequence], cfg: NetConfig = NetConfig(),
                 mask_rate: float = 0.0, seed=0):
        if not proxies:
            raise ValueError("dataset is empty")
        self.skel, self.cfg = skel, cfg
        seeds = np.random.SeedSequence(seed).spawn(len(proxies))
        self.labels = []
        for p, s in zip(proxies, seeds):
            if mask_rate > 0:
                p = mask_failures(p, mask_rate, s)
            self.labels.append(sequence_labels(skel, p, cfg.keypoint_map))
        groups: Dict[str, List[int]] = {}
        for i, lab in enumerate(self.labels):
            groups.setdefault(lab.proxy.source_id, []).append(i)
        self.groups = [g for g in groups.values()]

    def sample(self, rng: np.random.Generator, views: int = 2, frames: int = 3):
        half = self.cfg.window // 2
        for _ in range(100):
            grp = self.groups[int(rng.integers(len(self.groups)))]
            n = len(self.labels[grp[0]].joints2d)
            if len(grp) >= views and n >= self.cfg.window + frames - 1:
                break
        else:
            raise ValueError(f"no motion has {views} views and {self.cfg.window + frames - 1} frames")
        chosen = rng.choice(grp, size=views, replace=False)
        start = int(rng.integers(half, n - half - frames + 1))
        return self.batch([(int(i), start + k) for i in chosen for k in range(frames)], views, frames)

    def batch(self, entries, views: int = 1, frames: int = 1):
        """WindowBatch and Targets for (sequence index, centre frame) pairs."""
        half = self.cfg.window // 2
        labs = [(self.labels[i], c) for i, c in entries]
        sl = [slice(c - half, c + half + 1) for _, c in labs]
        wb = WindowBatch(
            joints2d=np.stack([lab.joints2d[s] for (lab, _), s in zip(labs, sl)]),
            confidence=np.stack([lab.confidence[s] for (lab, _), s in zip(labs, sl)]),
            obs=np.stack([lab.obs[c] for lab, c in labs]),
            obs_conf=np.stack([lab.confidence[c] for lab, c in labs]),
            prev_contact=np.stack([lab.prev_contact[c] for lab, c in labs]),
            fps=labs[0][0].proxy.fps)

        def pick(name):
            return np.stack([getattr(lab, name)[c] for lab, c in labs])

        tg = Targets(beta=pick("beta"), theta=pick("theta"), t=pick("t"), R6=pick("R6"), T=pick("T"),
                     joints=pick("joints"), proj=pick("proj"), g=pick("g"), contact=pick("contact"),
                     prev_contact_joints=pick("prev_contact"), contact_ids=self.cfg.contact_ids,
                     fps=wb.fps, views=views, frames=frames)
        return wb, tg


def oracle_state(targets: Targets, F_seq_dim: int = 0) -> DescentState:
    b = len(targets.t)
    return DescentState(Tensor(targets.beta), Tensor(targets.theta), Tensor(targets.t), Tensor(targets.R6),
                        Tensor(targets.T), Tensor(targets.g), Tensor(np.zeros((b, F_seq_dim))),
                        Tensor(targets.contact))


def init_estimate(pred: InitialPrediction, skel: ParametricSkeleton, cfg: NetConfig) -> Estimate:
    joints = forward_kinematics(skel, pred.beta, pred.theta, pred.t, pred.g)
    kp = keypoints_from_joints(joints, cfg.keypoint_map)
    proj, _ = F.project_normalized(kp, pred.R_H, pred.T)
    return Estimate(pred.beta, pred.theta, pred.t, pred.R6, pred.T, joints, proj, pred.g, pred.ind)


# -- training ---------------------------------------------------------------------------
@dataclass
class TrainConfig:
    seed: int = 0
    stage1_steps: int = 200
    stage2_steps: int = 200
    lr: float = 1e-4
    optimizer: str = "adam"
    views: int = 2
    frames: int = 3
    mask_rate: float = 0.5
    probe_batches: int = 4
    net: NetConfig = field(default_factory=NetConfig)
    loss: LossWeights = field(default_factory=LossWeights)


@dataclass
class TrainResult:
    init_net: InitNetwork
    descent_net: DescentNetwork
    stage1_curve: List[float]
    stage2_curve: List[float]
    stage1_probe: tuple
    stage2_probe: tuple


def _stage1_loss(net, skel, cfg, weights, wb, tg):
    pred = net(wb)
    return loss_rec(init_estimate(pred, skel, cfg), tg, weights)


def _stage2_loss(net, desc, skel, cfg, weights, wb, tg):
    with no_grad():
        pred = net(wb)
    ind = net.indicator(Tensor(pred.features.data))
    start = DescentState(*(Tensor(getattr(pred, k).data) for k in STATE_FIELDS + ("g", "F_seq")), ind)
    result = descend(start, wb, skel, desc, weights.iterations, cfg)
    if result.aborted:
        raise TrainingDivergedError("descent produced a non-finite update")
    rep = loss_desc([s.estimate() for s in result.trace], tg, weights)
    l_ind = indicator_loss(ind, tg.contact)
    rep.terms["ind"] = float(l_ind.data)
    rep.total = rep.total + weights.w_ind * l_ind
    return rep


def _check(value: float, stage: int, step: int, terms) -> None:
    if not np.isfinite(value):
        raise TrainingDivergedError(f"stage {stage} loss became non-finite at step {step}: {terms}")


def train_toy(dataset: WindowDataset, config: TrainConfig = TrainConfig(), init_net: InitNetwork = None,
              descent_net: DescentNetwork = None) -> TrainResult:
    """Two-stage training: the initializer on L_rec, then the refiner on L_desc + L_ind.

    In stage 2 the initializer is frozen except for its contact head, whose
    output enters both the contact residual and L_ind. Probe losses are
    measured on fixed batches before and after each stage.
    """
    cfg, weights = config.net, config.loss
    skel = dataset.skel
    rng = np.random.default_rng(config.seed)
    net = init_net or InitNetwork(cfg, seed=config.seed)
    desc = descent_net or DescentNetwork(cfg, seed=config.seed + 1)
    probe_rng = np.random.default_rng([config.seed, 7])
    probes = [dataset.sample(probe_rng, config.views, config.frames) for _ in range(config.probe_batches)]

    def probe(fn):
        with no_grad():
            return float(np.mean([fn(wb, tg).total.data for wb, tg in probes]))

    s1 = lambda wb, tg: _stage1_loss(net, skel, cfg, weights, wb, tg)  # noqa: E731
    s2 = lambda wb, tg: _stage2_loss(net, desc, skel, cfg, weights, wb, tg)  # noqa: E731

    curve1 = []
    before1 = probe(s1)
    opt = make_optimizer(config.optimizer, net.parameters(), config.lr)
    for step in range(config.stage1_steps):
        wb, tg = dataset.sample(rng, config.views, config.frames)
        opt.zero_grad()
        rep = s1(wb, tg)
        value = float(rep.total.data)
        _check(value, 1, step, rep.terms)
        curve1.append(value)
        rep.total.backward()
        opt.step()
    after1 = probe(s1)

    net.freeze()
    net.head_ind.freeze(False)
    curve2 = []
    before2 = probe(s2)
    opt = make_optimizer(config.optimizer, desc.parameters() + net.head_ind.parameters(), config.lr)
    for step in range(config.stage2_steps):
        wb, tg = dataset.sample(rng, config.views, config.frames)
        opt.zero_grad()
        rep = s2(wb, tg)
        value = float(rep.total.data)
        _check(value, 2, step, rep.terms)
        curve2.append(value)
        rep.total.backward()
        opt.step()
    after2 = probe(s2)
    return TrainResult(net, desc, curve1, curve2, (before1, after1), (before2, after2))
