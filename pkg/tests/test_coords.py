import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from proxymotion import coords, rotations
from proxymotion.camera import Intrinsics, look_at, sample_trajectory, static_trajectory
from proxymotion.coords import (HumanCentricState, InvariantError, WorldAccumulator, canonicalize,
                                compute_R_front, human_to_world, world_to_human)
from proxymotion.skeleton import MotionSequence, forward_kinematics_arrays, motion_joints
from proxymotion.synth import synthetic_walk


def turned(motion, yaw, shift):
    Y = rotations.yaw_matrix(yaw)
    out = motion.copy()
    out.t = motion.t @ Y.T + shift
    out.theta[:, 0] = rotations.matrix_to_axis_angle(Y @ rotations.axis_angle_to_matrix(motion.theta[:, 0]))
    return out


def test_canonicalize_is_idempotent(walk):
    once = canonicalize(walk)
    twice = canonicalize(once)
    np.testing.assert_allclose(twice.t, once.t, atol=1e-12)
    np.testing.assert_allclose(twice.theta, once.theta, atol=1e-12)


def test_canonicalize_removes_yaw_and_shift(skel, walk):
    moved = turned(walk, np.radians(40.0), np.array([5.0, 0.0, 3.0]))
    a = motion_joints(skel, canonicalize(walk))
    b = motion_joints(skel, canonicalize(moved))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_canonical_frame_zero_root():
    theta = np.zeros((3, 22, 3))
    theta[:, 0] = [0.0, 0.7, 0.0]
    t = np.tile([2.0, 1.0, 3.0], (3, 1))
    m = canonicalize(MotionSequence(np.zeros(10), theta, t, np.zeros((3, 2, 15, 3)), 60.0))
    np.testing.assert_allclose(m.t[0], [0.0, 1.0, 0.0], atol=1e-12)
    fwd = rotations.axis_angle_to_matrix(m.theta[0, 0])[:, 2]
    np.testing.assert_allclose(fwd, [0.0, 0.0, 1.0], atol=1e-12)


def test_vertical_heading_uses_lateral_axis():
    # pitched forward by 90 degrees: the local +z axis points straight down
    R = rotations.yaw_matrix(0.8) @ rotations.axis_angle_to_matrix(np.array([np.pi / 2, 0.0, 0.0]))
    A = coords.heading_alignment(R)
    lat = (A @ R)[:, 0]
    np.testing.assert_allclose(lat, [1.0, 0.0, 0.0], atol=1e-9)


def test_R_front_identity_for_forward_camera():
    np.testing.assert_allclose(compute_R_front(np.eye(3)), np.eye(3), atol=1e-15)


def test_R_front_quarter_turn():
    R_H = look_at((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)).R
    Rf = compute_R_front(R_H)
    angle = rotations.matrix_to_axis_angle(Rf)
    np.testing.assert_allclose(np.abs(angle), [0.0, np.pi / 2, 0.0], atol=1e-12)
    np.testing.assert_allclose(Rf.T @ R_H[2], [0.0, 0.0, 1.0], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 3, elements=st.floats(-3, 3)))
def test_R_front_puts_forward_on_plus_z(aa):
    R_H = rotations.axis_angle_to_matrix(aa)
    f = R_H[2]
    if np.hypot(f[0], f[2]) < 1e-3:
        return
    g = compute_R_front(R_H).T @ f
    assert abs(g[0]) < 1e-9 and g[2] > 0


def test_R_front_vertical_camera_warns():
    R_H = look_at((0.0, 5.0, 0.0), (0.0, 0.0, 0.0), up=(0.0, 0.0, 1.0)).R
    with pytest.warns(RuntimeWarning):
        Rf = compute_R_front(R_H)
    assert np.array_equal(Rf, np.eye(3))


def test_identity_step():
    state = HumanCentricState(np.zeros((22, 3)), np.zeros(3), np.eye(3), np.zeros(3))
    frame, acc = human_to_world(state, WorldAccumulator(), np.zeros(3))
    np.testing.assert_allclose(frame.R_W, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(frame.T_W, 0.0, atol=1e-15)
    np.testing.assert_allclose(frame.t_W, 0.0, atol=1e-15)
    np.testing.assert_allclose(acc.t_xz, 0.0, atol=1e-15)


def test_translation_accumulates():
    state = HumanCentricState(np.zeros((22, 3)), np.array([0.0, 0.0, 0.1]), np.eye(3), np.zeros(3))
    acc = WorldAccumulator()
    for _ in range(2):
        _, acc = human_to_world(state, acc, np.zeros(3))
    np.testing.assert_allclose(acc.t_xz, [0.0, 0.0, 0.2], atol=1e-15)
    assert acc.frame_index == 2


@settings(max_examples=50, deadline=None)
@given(arrays(float, 3, elements=st.floats(-3, 3)), arrays(float, 3, elements=st.floats(-2, 2)),
       arrays(float, 3, elements=st.floats(-2, 2)), arrays(float, 2, elements=st.floats(-5, 5)),
       arrays(float, 3, elements=st.floats(-2, 2)))
def test_camera_center_follows_the_body_transform(aa, T_H, t_H, txz, root_aa):
    R_H = rotations.axis_angle_to_matrix(aa)
    if np.hypot(R_H[2, 0], R_H[2, 2]) < 1e-3:
        return
    J_root = np.array([0.0, 0.9, 0.0])
    theta = np.zeros((22, 3))
    theta[0] = root_aa
    acc = WorldAccumulator(np.array([txz[0], 0.0, txz[1]]))
    frame, _ = human_to_world(HumanCentricState(theta, t_H, R_H, T_H), acc, J_root)
    def rigid(x):
        return frame.R_front.T @ x + acc.t_xz
    np.testing.assert_allclose(-frame.R_W.T @ frame.T_W, rigid(-R_H.T @ T_H), atol=1e-9)
    np.testing.assert_allclose(frame.t_W + J_root, rigid(t_H + J_root), atol=1e-9)
    R_root = rotations.axis_angle_to_matrix(frame.theta_root)
    np.testing.assert_allclose(R_root, frame.R_front.T @ rotations.axis_angle_to_matrix(root_aa), atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 3, elements=st.floats(-3, 3)), arrays(float, 3, elements=st.floats(-2, 2)),
       arrays(float, 3, elements=st.floats(-2, 2)), arrays(float, (22, 3), elements=st.floats(-1, 1)),
       st.sampled_from(["compose", "axis"]))
def test_round_trip(aa, T_H, t_H, theta, mode):
    R_H = rotations.axis_angle_to_matrix(aa)
    state = HumanCentricState(theta, t_H, R_H, T_H)
    acc = WorldAccumulator(np.array([0.3, 0.0, -1.2]))
    J_root = np.array([0.0, 0.9, 0.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        frame, _ = human_to_world(state, acc, J_root, root_mode=mode)
    back = world_to_human(frame, acc, J_root, theta_body=theta[1:], root_mode=mode)
    np.testing.assert_allclose(back.theta_H, theta, atol=1e-9)
    np.testing.assert_allclose(back.t_H, t_H, atol=1e-9)
    np.testing.assert_allclose(back.R_H, R_H, atol=1e-9)
    np.testing.assert_allclose(back.T_H, T_H, atol=1e-9)


def test_axis_mode_rotates_the_vector():
    state = HumanCentricState(np.array([[0.3, 0.0, 0.0]]), np.zeros(3),
                              look_at((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)).R, np.zeros(3))
    frame, _ = human_to_world(state, WorldAccumulator(), np.zeros(3), root_mode="axis")
    np.testing.assert_allclose(frame.theta_root, frame.R_front.T @ [0.3, 0.0, 0.0], atol=1e-15)
    with pytest.raises(ValueError):
        human_to_world(state, WorldAccumulator(), np.zeros(3), root_mode="spin")


def test_invariant_violations():
    with pytest.raises(InvariantError):
        WorldAccumulator(np.array([0.0, 0.1, 0.0]))
    with pytest.raises(InvariantError):
        HumanCentricState(np.zeros((22, 3)), np.zeros(3), 2.0 * np.eye(3), np.zeros(3))


def test_labels_do_not_depend_on_the_camera(skel, walk):
    J_root = skel.root_position(walk.beta)
    track = walk.t[:, :] + J_root
    a = coords.decompose(walk, sample_trajectory(1, len(walk), track), J_root)
    b = coords.decompose(walk, sample_trajectory(2, len(walk), track), J_root)
    np.testing.assert_allclose(a.theta_H, b.theta_H, atol=1e-12)
    np.testing.assert_allclose(a.t_H, b.t_H, atol=1e-12)
    assert not np.allclose(a.R_H, b.R_H)


def test_world_reconstruction_up_to_frame_zero_transform(skel):
    motion = synthetic_walk(skel, 300, seed=8)
    J_root = skel.root_position(motion.beta)
    ex = look_at((1.0, 1.2, -6.0), (1.0, 1.0, 4.0))
    yaw = rotations.yaw_matrix(0.6)
    # any constant camera heading: the rebuilt world differs from the original by one fixed rigid transform
    R = ex.R @ yaw.T
    camera = static_trajectory(Intrinsics.from_fov(60.0), type(ex)(R, ex.T), len(motion))
    track = coords.decompose(motion, camera, J_root)
    world = coords.accumulate_track(track, J_root)
    theta = track.theta_H.copy()
    theta[:, 0] = world.theta[:, 0]
    recon = forward_kinematics_arrays(skel, motion.beta, theta, world.t, motion.g)
    truth = motion_joints(skel, motion)
    # R_front follows the body heading, but x -> R_front^T A_t x is one fixed rotation
    M = np.swapaxes(world.R_front, 1, 2) @ track.heading
    np.testing.assert_allclose(M, np.broadcast_to(M[0], M.shape), atol=1e-9)
    np.testing.assert_allclose(recon, truth @ M[0].T, atol=1e-6)
    # camera poses stay consistent with the rebuilt world: projections are unchanged
    cam = np.einsum("fij,fkj->fki", world.R, recon) + world.T[:, None]
    cam0 = np.einsum("fij,fkj->fki", camera.R, truth) + camera.T[:, None]
    np.testing.assert_allclose(cam, cam0, atol=1e-6)


def test_accumulate_matches_stepwise(skel, walk):
    J_root = skel.root_position(walk.beta)
    camera = sample_trajectory(4, len(walk), walk.t + J_root)
    track = coords.decompose(walk, camera, J_root)
    world = coords.accumulate_track(track, J_root)
    acc = WorldAccumulator()
    for f in range(len(walk)):
        frame, acc = human_to_world(track.state(f), acc, J_root)
        np.testing.assert_allclose(world.t[f], frame.t_W, atol=1e-15)
        np.testing.assert_allclose(world.T[f], frame.T_W, atol=1e-15)
    assert world.t_xz[:, 1].max() == 0.0
