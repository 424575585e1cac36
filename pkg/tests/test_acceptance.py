"""Acceptance checks, one test per criterion.

Each test asserts the stated tolerance and runtime budget directly; none of
them is relaxed relative to the criterion it checks.
"""

import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.ndimage import uniform_filter1d

from proxymotion import coords, motion_net as mn, rotations
from proxymotion.camera import CameraRanges, look_at, sample_fov, sample_trajectory, static_trajectory, Intrinsics
from proxymotion.eval.losses import consistency, contact_deviation
from proxymotion.eval.metrics import (foot_floating, ground_penetration, metric_suite, pa_mpjpe, w_mpjpe,
                                      wa_mpjpe)
from proxymotion.nn import functional as F
from proxymotion.nn import gradcheck
from proxymotion.nn.tensor import Tensor, no_grad
from proxymotion.proxy import contact_indicator, joint_noise, synthesize_proxy
from proxymotion.skeleton import forward_kinematics_arrays, motion_joints
from proxymotion.synth import synthetic_hops, synthetic_walk


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# 1 -----------------------------------------------------------------------------------
def test_c1_contact_indicator_closed_form():
    start = time.perf_counter()
    mid = contact_indicator(0.2, 0.08)
    rest = contact_indicator(0.0, 0.0)
    elapsed = time.perf_counter() - start
    assert abs(mid - 0.25) < 1e-9
    assert abs(rest - sigmoid(5.0) * sigmoid(10.0)) < 1e-9
    assert elapsed < 1e-3


# 2 -----------------------------------------------------------------------------------
def test_c2_partial_conv_equivalence_and_garbage_invariance():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        c_in, c_out = rng.integers(1, 6, size=2)
        k = int(rng.choice([1, 3, 5]))
        d = int(rng.integers(1, 5))
        L = F.receptive_length(k, d) + int(rng.integers(0, 12))
        batch = int(rng.integers(1, 3))
        x = rng.normal(size=(batch, c_in, L))
        w = rng.normal(size=(c_out, c_in, k))
        b = rng.normal(size=c_out)
        dense = F.conv1d_dilated(x, w, b, d).data
        y, m = F.partial_conv1d(x, np.ones_like(x), w, b, d)
        worst = max(worst, float(np.abs(y.data - dense).max()))
        assert m.all()

        mask = rng.random(x.shape) < rng.uniform(0.0, 1.0)
        g1 = np.where(mask, x, rng.normal(scale=1e6, size=x.shape))
        g2 = np.where(mask, x, np.where(rng.random(x.shape) < 0.5, np.nan, np.inf))
        y1, m1 = F.partial_conv1d(g1, mask, w, b, d)
        y2, m2 = F.partial_conv1d(g2, mask, w, b, d)
        assert np.array_equal(y1.data, y2.data)
        assert np.array_equal(m1, m2)
    elapsed = time.perf_counter() - start
    assert worst <= 1e-12
    assert elapsed < 10.0


# 3 -----------------------------------------------------------------------------------
REQUIRED_OPS = {"dense", "conv1d_dilated", "partial_conv1d", "cross_attention", "softmax", "loss_mpjpe",
                "loss_l1", "loss_mse", "loss_consist", "loss_smooth", "loss_contact", "loss_ind", "loss_rec",
                "loss_desc"}


def test_c3_gradient_suite():
    start = time.perf_counter()
    results = gradcheck.run_suite(seed=0, eps=1e-5, tolerance=1e-4)
    elapsed = time.perf_counter() - start
    names = {r.name for r in results}
    assert REQUIRED_OPS <= names
    failing = {r.name: r.max_rel_error for r in results if not r.max_rel_error < 1e-4}
    assert not failing
    assert elapsed < 60.0


# 4 -----------------------------------------------------------------------------------
def test_c4_camera_consistency(skel):
    motion = synthetic_walk(skel, 240, seed=11)
    proxies = synthesize_proxy(skel, motion, num_cameras=4, rng_seed=5)
    assert len(proxies) == 4
    J_root = skel.root_position(motion.beta)
    tracks = [coords.decompose(motion, p.camera, J_root) for p in proxies]
    for tr in tracks[1:]:
        assert np.abs(tr.theta_H - tracks[0].theta_H).max() < 1e-9
        assert np.abs(tr.t_H - tracks[0].t_H).max() < 1e-9
    for p in proxies[1:]:
        assert np.abs(p.canonical_gt.theta_H - proxies[0].canonical_gt.theta_H).max() < 1e-9
        assert np.abs(p.canonical_gt.t_H - proxies[0].canonical_gt.t_H).max() < 1e-9
    theta = Tensor(np.concatenate([tr.theta_H for tr in tracks]))
    t = Tensor(np.concatenate([tr.t_H for tr in tracks]))
    assert float(consistency(theta, t, views=4, frames=len(motion)).data) == 0.0


# 5 -----------------------------------------------------------------------------------
def test_c5_round_trip_and_world_accumulation(skel):
    rng = np.random.default_rng(5)
    J_root = skel.root_position(np.zeros(10))
    worst = 0.0
    for _ in range(200):
        R_H = rotations.axis_angle_to_matrix(rng.normal(size=3))
        state = coords.HumanCentricState(rng.normal(size=(22, 3)), rng.normal(size=3), R_H, rng.normal(size=3))
        acc = coords.WorldAccumulator(np.array([rng.normal(), 0.0, rng.normal()]))
        frame, _ = coords.human_to_world(state, acc, J_root)
        back = coords.world_to_human(frame, acc, J_root, theta_body=state.theta_H[1:])
        # axis-angle is not unique past pi, so the root is compared as a matrix
        roots = rotations.axis_angle_to_matrix(np.stack([back.theta_H[0], state.theta_H[0]]))
        for a, b in ((roots[0], roots[1]), (back.theta_H[1:], state.theta_H[1:]), (back.t_H, state.t_H),
                     (back.R_H, state.R_H), (back.T_H, state.T_H)):
            worst = max(worst, float(np.abs(a - b).max()))
    assert worst < 1e-9

    motion = synthetic_walk(skel, 600, seed=21)
    centre = motion.t[:, [0, 2]].mean(axis=0)
    ex = look_at((centre[0], 1.5, centre[1] - 8.0), (centre[0], 1.0, centre[1]))
    camera = static_trajectory(Intrinsics.from_fov(60.0), ex, len(motion))
    J_root = skel.root_position(motion.beta)
    track = coords.decompose(motion, camera, J_root)
    world = coords.accumulate_track(track, J_root)
    theta = track.theta_H.copy()
    theta[:, 0] = world.theta[:, 0]
    recon = forward_kinematics_arrays(skel, motion.beta, theta, world.t, motion.g)

    # oracle: compose each frame's rigid transform x_W = A_t^T x_H + o_t explicitly
    joints_h = forward_kinematics_arrays(skel, motion.beta, track.theta_H, track.t_H, motion.g)
    oracle = np.stack([A.T @ jh.T for A, jh in zip(track.heading, joints_h)]).transpose(0, 2, 1)
    oracle = oracle + track.origin[:, None]
    assert np.abs(recon - oracle).max() < 1e-6
    assert np.abs(recon - motion_joints(skel, motion)).max() < 1e-6


# 6 -----------------------------------------------------------------------------------
def test_c6_oracle_descent(skel):
    cfg = mn.NetConfig()
    proxies = []
    for i, make in enumerate((synthetic_walk, synthetic_hops, synthetic_hops)):
        proxies += synthesize_proxy(skel, make(skel, 150, seed=60 + i), num_cameras=2, noise=0.0,
                                    rng_seed=i, source_id=f"m{i}")
    ds = mn.WindowDataset(skel, proxies, cfg)
    rng = np.random.default_rng(6)
    entries = [(int(rng.integers(len(proxies))), int(rng.integers(40, 110))) for _ in range(100)]
    wb, tg = ds.batch(entries)
    gt = mn.oracle_state(tg, cfg.feature_dim)
    refiner = mn.OracleRefiner({k: getattr(tg, k) for k in mn.STATE_FIELDS}, step=0.5)
    with no_grad():
        noisy = {k: getattr(gt, k).data + rng.normal(0.0, s, getattr(gt, k).shape)
                 for k, s in (("beta", 0.3), ("theta", 0.1), ("t", 0.1), ("R6", 0.1), ("T", 0.2))}
        noisy["R6"] = mn.orthonormalize_6d(Tensor(noisy["R6"])).data
        start = replace(gt, **{k: Tensor(v) for k, v in noisy.items()})
        result = mn.descend(start, wb, skel, refiner, iterations=3, cfg=cfg)
        assert not result.aborted
        assert len(result.trace) == 4
        norms = np.array([np.linalg.norm(s.S_proj.data.reshape(len(entries), -1), axis=1) for s in result.trace])
        assert np.all(np.diff(norms, axis=0) < 0)

        at_gt = mn.descend(gt, wb, skel, refiner, iterations=0, cfg=cfg).state
    assert np.abs(at_gt.S_proj.data).max() < 1e-9
    # ind^gt is the binarized GT label, as in the contact loss; hop stances are still and on the ground
    hop_rows = [r for r, (i, _) in enumerate(entries) if proxies[i].source_id != "m0"]
    assert len(hop_rows) > 30
    vel, height = contact_deviation(at_gt.joints, wb.prev_contact, cfg.contact_ids, wb.fps)
    planted = tg.contact >= 0.5
    assert planted[hop_rows].any()
    dev = np.concatenate([vel.data, height.data[..., None]], axis=-1) * planted[..., None]
    assert np.abs(dev[hop_rows]).max() < 1e-9


# 7 -----------------------------------------------------------------------------------
def test_c7_metric_oracles(skel):
    gt = motion_joints(skel, synthetic_hops(skel, 90, seed=7))
    rep = metric_suite(gt, gt, 60.0, skel.contact_joint_ids)
    assert rep.w_mpjpe == pytest.approx(0.0, abs=1e-9)
    assert rep.wa_mpjpe == pytest.approx(0.0, abs=1e-9)
    assert rep.pa_mpjpe == pytest.approx(0.0, abs=1e-9)
    assert rep.accel == pytest.approx(0.0, abs=1e-9)
    assert rep.gp == [0.0] * 5 and rep.ff == [0.0] * 5

    shifted = metric_suite(gt + np.array([0.3, -0.2, 1.5]), gt, 60.0, skel.contact_joint_ids)
    assert shifted.w_mpjpe == pytest.approx(0.0, abs=1e-9)
    assert shifted.wa_mpjpe == pytest.approx(0.0, abs=1e-9)
    assert shifted.pa_mpjpe == pytest.approx(0.0, abs=1e-9)
    assert shifted.accel == pytest.approx(0.0, abs=1e-9)

    rng = np.random.default_rng(77)
    short = gt[:30]
    for _ in range(1000):
        s = rng.uniform(0.005, 0.1)
        pred = short + rng.normal(0.0, s, short.shape) + np.cumsum(rng.normal(0.0, s / 5, (30, 1, 3)), axis=0)
        pred = pred @ rotations.axis_angle_to_matrix(rng.normal(size=3)).T + rng.normal(0.0, 2.0, 3)
        pa, wa, w = pa_mpjpe(pred, short), wa_mpjpe(pred, short), w_mpjpe(pred, short)
        assert pa <= wa <= w

    for _ in range(50):
        h = rng.uniform(-0.04, 0.04, size=(40, 4))
        planted = rng.random((40, 4))
        for thr in (0.01, 0.015, 0.02, 0.025, 0.03):
            gp_count = sum(1 for f in range(40) if any(h[f, c] < -thr for c in range(4)))
            ff_count = sum(1 for f in range(40) if any(planted[f, c] >= 0.5 and abs(h[f, c]) > thr
                                                        for c in range(4)))
            assert ground_penetration(h, thr) == 100.0 * gp_count / 40
            assert foot_floating(h, planted, thr) == 100.0 * ff_count / 40
        sweep = [foot_floating(h, planted, t) for t in np.linspace(0.01, 0.03, 21)]
        assert all(a >= b for a, b in zip(sweep, sweep[1:]))


# 8 -----------------------------------------------------------------------------------
def _toy_dataset(skel):
    proxies = []
    for i in range(8):
        make = synthetic_walk if i % 2 == 0 else synthetic_hops
        proxies += synthesize_proxy(skel, make(skel, 120, seed=i), num_cameras=4, rng_seed=i, source_id=f"m{i}")
    assert len(proxies) == 32
    return mn.WindowDataset(skel, proxies, mn.NetConfig(hidden=64), mask_rate=0.5, seed=0)


def test_c8_toy_training(skel):
    ds = _toy_dataset(skel)
    start = time.perf_counter()
    cfg = mn.TrainConfig(seed=0, stage1_steps=1000, stage2_steps=1000, lr=1e-4, net=ds.cfg)
    result = mn.train_toy(ds, cfg)
    elapsed = time.perf_counter() - start
    before1, after1 = result.stage1_probe
    before2, after2 = result.stage2_probe
    assert ds.cfg.hidden <= 128
    assert after1 <= 0.1 * before1
    assert after2 <= 0.5 * before2
    assert elapsed < 15 * 60

    short = replace(cfg, stage1_steps=15, stage2_steps=15)
    a, b = mn.train_toy(ds, short), mn.train_toy(ds, short)
    assert a.stage1_curve == b.stage1_curve and a.stage2_curve == b.stage2_curve
    for (na, va), (nb, vb) in zip(a.init_net.named_parameters(), b.init_net.named_parameters()):
        assert na == nb and np.array_equal(va.data, vb.data)


# 9 -----------------------------------------------------------------------------------
def test_c9_generator_statistics():
    ranges = CameraRanges()
    rng = np.random.default_rng(9)
    fov = sample_fov(rng, ranges, size=100_000)
    assert fov.min() >= 30.0 and fov.max() <= 90.0

    dist, height = [], []
    track = np.zeros((1000, 3))
    track[:, 0] = np.linspace(0.0, 6.0, 1000)
    track[:, 1] = 0.9
    for seed in range(100):
        cam = sample_trajectory(seed, 1000, track, ranges=ranges)
        fov_deg = np.degrees(2 * np.arctan(0.5 * cam.intrinsics.image_size[1] / cam.intrinsics.focal))
        assert 30.0 <= fov_deg <= 90.0
        centres = -np.einsum("fji,fj->fi", cam.R, cam.T)
        smooth = uniform_filter1d(track, size=60, axis=0, mode="nearest")
        dist.append(np.hypot(*(centres - smooth)[:, [0, 2]].T))
        height.append(centres[:, 1])
    dist, height = np.concatenate(dist), np.concatenate(height)
    assert dist.size == 100_000
    assert dist.min() >= 1.0 - 1e-9 and dist.max() <= 5.0 + 1e-9
    assert height.min() >= 0.5 - 1e-9 and height.max() <= 2.0 + 1e-9

    for value, mode in ((0.01, "std"), (0.01, "variance")):
        noise = joint_noise((100_000, 3), value, mode, np.random.default_rng(99))
        target = value ** 2 if mode == "std" else value
        assert np.all(np.abs(noise.var(axis=0) / target - 1.0) < 0.05)
