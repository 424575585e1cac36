import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxymotion import rotations
from proxymotion.camera import project
from proxymotion.coords import canonicalize
from proxymotion.proxy import (ContactParams, HandClip, contact_indicator, contacts_from_joints, integrate_hands,
                               label_contacts, mask_failures, resample_motion, synthesize_proxy)
from proxymotion.skeleton import MotionSequence, motion_joints
from proxymotion.synth import synthetic_hand_clip

PLANTED = 1.0 / (1.0 + np.exp(-5.0)) / (1.0 + np.exp(-10.0))
SLIDING = 1.0 / (1.0 + np.exp(5.0)) / (1.0 + np.exp(-10.0))


def still_motion(n, t=None, fps=60.0):
    t = np.zeros((n, 3)) if t is None else t
    return MotionSequence(np.zeros(10), np.zeros((n, 22, 3)), t, np.zeros((n, 2, 15, 3)), fps)


def test_indicator_values():
    assert contact_indicator(0.2, 0.08) == pytest.approx(0.25, abs=1e-12)
    assert contact_indicator(0.0, 0.0) == pytest.approx(0.99326, abs=1e-5)
    assert contact_indicator(10.0, 0.0) < 1e-10


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(-0.1, 1), st.floats(-0.1, 1))
def test_indicator_monotone(v1, v2, z1, z2):
    lo_v, hi_v = sorted((v1, v2))
    lo_z, hi_z = sorted((z1, z2))
    assert contact_indicator(hi_v, lo_z) <= contact_indicator(lo_v, lo_z)
    assert contact_indicator(lo_v, hi_z) <= contact_indicator(lo_v, lo_z)


def test_contact_params_must_be_positive():
    with pytest.raises(ValueError):
        ContactParams(k_v=0.0)


def test_stationary_foot_labels(skel):
    labels = label_contacts(skel, still_motion(10))
    np.testing.assert_allclose(labels, PLANTED, atol=1e-12)


def test_lifted_foot_labels(skel):
    t = np.zeros((10, 3))
    t[:, 1] = 1.0
    assert label_contacts(skel, still_motion(10, t)).max() < 1e-40


def test_alternating_speed_labels(skel):
    t = np.zeros((12, 3))
    t[:, 0] = (np.arange(12) // 2) * (0.4 / 60.0)
    labels = label_contacts(skel, still_motion(12, t))
    np.testing.assert_allclose(labels[1::2], PLANTED, atol=1e-9)
    np.testing.assert_allclose(labels[2::2], SLIDING, atol=1e-9)


def test_single_frame_has_zero_velocity():
    joints = np.zeros((1, 4, 3))
    np.testing.assert_allclose(contacts_from_joints(joints, 60.0, range(4)), PLANTED)


def test_resample_integer_decimation(walk):
    fast = MotionSequence(walk.beta, walk.theta, walk.t, walk.g, 120.0)
    slow = resample_motion(fast, 60.0)
    assert len(slow) == 60
    assert np.array_equal(slow.theta, walk.theta[::2])
    assert np.array_equal(slow.t, walk.t[::2])


def test_resample_constant_pose():
    m = still_motion(30, fps=30.0)
    m.theta[:] = [0.3, -0.2, 0.5]
    out = resample_motion(m, 47.0)
    np.testing.assert_allclose(out.theta, 0.0 * out.theta + [0.3, -0.2, 0.5], atol=1e-12)


def test_resample_slerp_midpoint():
    m = still_motion(2, fps=1.0)
    m.theta[1, 0] = [0.0, 0.0, np.pi / 2]
    out = resample_motion(m, 2.0)
    np.testing.assert_allclose(out.theta[1, 0], [0.0, 0.0, np.pi / 4], atol=1e-12)


def test_resample_rejects_empty():
    with pytest.raises(ValueError):
        resample_motion(still_motion(0), 30.0)


def test_constant_hand_clip():
    g = np.tile([0.1, 0.2, -0.3], (30, 2, 15, 1))
    out = integrate_hands(still_motion(100), HandClip(g), rng_seed=0)
    np.testing.assert_allclose(out.g, 0.0 * out.g + [0.1, 0.2, -0.3], atol=1e-12)


def test_hand_integration_deterministic():
    clip = synthetic_hand_clip(45, seed=2)
    a = integrate_hands(still_motion(200), clip, rng_seed=9)
    b = integrate_hands(still_motion(200), clip, rng_seed=9)
    assert np.array_equal(a.g, b.g)


def test_hand_samples_lie_on_slerp_arcs():
    clip = synthetic_hand_clip(45, seed=3)
    for seed in range(5):
        out, info = integrate_hands(still_motion(150), clip, rng_seed=seed, return_info=True)
        pos = info.source_positions
        i0 = np.floor(pos).astype(int)
        i1 = np.minimum(i0 + 1, len(clip) - 1)
        q0 = rotations.axis_angle_to_quaternion(clip.g[i0])
        q1 = rotations.axis_angle_to_quaternion(clip.g[i1])
        q = rotations.axis_angle_to_quaternion(out.g)
        residual = rotations.quaternion_angle(q0, q) + rotations.quaternion_angle(q, q1) \
            - rotations.quaternion_angle(q0, q1)
        assert np.abs(residual).max() < 1e-9


def test_short_hand_clip_rejected():
    with pytest.raises(ValueError, match="shorter"):
        integrate_hands(still_motion(100), synthetic_hand_clip(10), rng_seed=0)


def test_noiseless_projection_is_exact(skel, walk):
    proxies = synthesize_proxy(skel, walk, num_cameras=2, noise=0.0, rng_seed=1)
    joints = motion_joints(skel, canonicalize(walk, skel.root_position(walk.beta)))
    for p in proxies:
        uv, valid = project(joints, p.camera.intrinsics, p.camera.R, p.camera.T)
        seen = p.confidence > 0
        assert seen.any()
        np.testing.assert_allclose(p.joints2d[seen], uv[seen], atol=1e-9)


def test_four_cameras_share_labels(skel, walk):
    proxies = synthesize_proxy(skel, walk, rng_seed=2, source_id="w")
    assert len(proxies) == 4
    assert {p.source_id for p in proxies} == {"w"}
    for p in proxies[1:]:
        assert np.array_equal(p.contact, proxies[0].contact)
        assert np.array_equal(p.canonical_gt.theta_H, proxies[0].canonical_gt.theta_H)
        assert np.array_equal(p.canonical_gt.t_H, proxies[0].canonical_gt.t_H)
    assert not np.array_equal(proxies[0].camera.R, proxies[1].camera.R)


def test_generation_is_deterministic(skel, walk):
    a = synthesize_proxy(skel, walk, num_cameras=2, rng_seed=5)
    b = synthesize_proxy(skel, walk, num_cameras=2, rng_seed=5)
    for p, q in zip(a, b):
        assert np.array_equal(p.joints2d, q.joints2d) and np.array_equal(p.camera.T, q.camera.T)


def test_invisible_subject_dropped_with_warning(skel, walk):
    far = np.zeros((1, 52))
    far[0, 15] = 1e4
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = synthesize_proxy(skel, walk, num_cameras=2, rng_seed=0, keypoint_map=far)
    assert out == []
    assert any("dropped" in str(w.message) for w in caught)


def test_wrong_fps_rejected(skel, walk):
    with pytest.raises(ValueError, match="resample"):
        synthesize_proxy(skel, MotionSequence(walk.beta, walk.theta, walk.t, walk.g, 30.0))


def _long_proxy(skel, walk, n=20000):
    p = synthesize_proxy(skel, walk, num_cameras=1, noise=0.0, rng_seed=0)[0]
    reps = -(-n // len(p))
    from dataclasses import replace
    cam = p.camera
    return replace(p, joints2d=np.tile(p.joints2d, (reps, 1, 1))[:n], confidence=np.ones((n, 52)),
                   contact=np.tile(p.contact, (reps, 1))[:n],
                   camera=type(cam)(cam.intrinsics, np.tile(cam.R, (reps, 1, 1))[:n], np.tile(cam.T, (reps, 1))[:n]),
                   canonical_gt=_tile_track(p.canonical_gt, reps, n))


def _tile_track(track, reps, n):
    from proxymotion.coords import HumanCentricTrack
    return HumanCentricTrack(*(np.tile(a, (reps,) + (1,) * (a.ndim - 1))[:n] for a in
                               (track.theta_H, track.t_H, track.R_H, track.T_H, track.heading, track.origin)))


def test_mask_rates(skel, walk):
    p = _long_proxy(skel, walk)
    same = mask_failures(p, 0.0, rng_seed=1)
    assert np.array_equal(same.confidence, p.confidence)
    assert np.array_equal(same.joints2d, p.joints2d)
    assert not mask_failures(p, 1.0, rng_seed=1).confidence.any()
    half = mask_failures(p, 0.5, rng_seed=1)
    assert abs((half.confidence == 0).mean() - 0.5) <= 0.02
    hands = (half.confidence[:, 22:] == 0).mean()
    assert hands == pytest.approx(0.6, abs=0.03)


def test_masked_entries_zeroed(skel, walk):
    p = synthesize_proxy(skel, walk, num_cameras=1, rng_seed=0)[0]
    m = mask_failures(p, 0.5, rng_seed=3)
    assert np.all(m.joints2d[m.confidence == 0] == 0.0)
    with pytest.raises(ValueError):
        mask_failures(p, 1.5)
