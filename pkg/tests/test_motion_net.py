import numpy as np
import pytest

from proxymotion.motion_net import (STATE_FIELDS, DescentNetwork, DescentState, InitNetwork, NetConfig,
                                    NoObservationsError, OracleRefiner, TrainConfig, WindowDataset,
                                    contact_status, descend, misalignment, oracle_state, train_toy)
from proxymotion.nn import Tensor, no_grad
from proxymotion.proxy import synthesize_proxy
from proxymotion.synth import synthetic_hops

SMALL = NetConfig(window=9, hidden=16, dilations=(1, 3), descent_tokens=4, descent_dim=8)


@pytest.fixture(scope="module")
def dataset(skel):
    walk = synthetic_hops(skel, 60, seed=5)
    proxies = synthesize_proxy(skel, walk, num_cameras=2, noise=0.0, rng_seed=3, source_id="h")
    return WindowDataset(skel, proxies, SMALL, seed=0)


def test_window_must_match_receptive_field():
    with pytest.raises(ValueError, match="cover"):
        NetConfig(window=81, dilations=(1, 3, 9))


def test_init_forward_shapes_and_determinism(dataset):
    wb, _ = dataset.batch([(0, 20), (1, 30)])
    a = InitNetwork(SMALL, seed=4)(wb)
    b = InitNetwork(SMALL, seed=4)(wb)
    assert a.theta.shape == (2, 22, 3) and a.g.shape == (2, 2, 15, 3) and a.ind.shape == (2, 4)
    assert np.array_equal(a.theta.data, b.theta.data)
    R = a.R_H.data
    np.testing.assert_allclose(R @ np.swapaxes(R, 1, 2), np.broadcast_to(np.eye(3), R.shape), atol=1e-12)


def test_init_needs_observations(dataset):
    wb, _ = dataset.batch([(0, 20)])
    wb.confidence[:] = 0.0
    with pytest.raises(NoObservationsError):
        InitNetwork(SMALL)(wb)


def test_masked_hands_stay_finite_and_ignore_garbage(dataset):
    wb, _ = dataset.batch([(0, 20)])
    wb.confidence[:, :, 22:] = 0.0
    net = InitNetwork(SMALL, seed=2)
    with no_grad():
        clean = net(wb)
        wb.joints2d[:, :, 22:] = np.nan
        dirty = net(wb)
    assert all(np.isfinite(getattr(clean, k).data).all() for k in STATE_FIELDS)
    assert np.array_equal(clean.theta.data, dirty.theta.data)
    assert np.array_equal(clean.g.data, dirty.g.data)


def test_misalignment_zero_at_ground_truth(dataset):
    wb, tg = dataset.batch([(0, 20), (1, 40)])
    from proxymotion.nn.functional import rot6d_to_matrix
    S, _, info = misalignment(tg.joints, rot6d_to_matrix(tg.R6), tg.T, wb.obs, wb.obs_conf)
    assert np.abs(S.data).max() < 1e-9
    assert not info.unobserved.any() and not info.behind_camera.any()


def test_misalignment_offset_example():
    J = np.array([[[0.1, 0.0, 2.0]]])
    S, _, _ = misalignment(J, np.eye(3)[None], np.zeros((1, 3)), np.zeros((1, 1, 2)), np.ones((1, 1)))
    np.testing.assert_allclose(S.data, [[[0.05, 0.0]]], atol=1e-15)


def test_misalignment_flags():
    J = np.array([[[0.0, 0.0, 2.0], [0.0, 0.0, -1.0]]])
    S, _, info = misalignment(J, np.eye(3)[None], np.zeros((1, 3)), np.full((1, 2, 2), 0.3), np.ones((1, 2)))
    assert info.behind_camera.tolist() == [1]
    assert np.all(S.data[0, 1] == 0.0)
    _, _, info = misalignment(J, np.eye(3)[None], np.zeros((1, 3)), np.zeros((1, 2, 2)), np.zeros((1, 2)))
    assert info.unobserved.tolist() == [True]


def _contact_joints(pos):
    J = np.zeros((1, 12, 3))
    J[0, [7, 8, 10, 11]] = pos
    return J


def test_contact_status_examples():
    cur = _contact_joints([0.3 / 60, 0.05, 0.0])
    prev = np.zeros((1, 4, 3))
    np.testing.assert_array_equal(contact_status(cur, prev, np.zeros((1, 4)), 60.0).data, 0.0)
    planted = contact_status(_contact_joints([0.0, 0.0, 0.0]), prev, np.ones((1, 4)), 60.0).data
    np.testing.assert_array_equal(planted, 0.0)
    sliding = contact_status(cur, prev, np.ones((1, 4)), 60.0).data
    np.testing.assert_allclose(sliding, np.tile([0.3, 0.0, 0.05], (1, 4, 1)), atol=1e-12)


def test_unknown_previous_position_gives_zero_velocity():
    cur = _contact_joints([1.0, 0.02, 1.0])
    out = contact_status(cur, np.full((1, 4, 3), np.nan), np.ones((1, 4)), 60.0).data
    np.testing.assert_allclose(out[..., :2], 0.0)
    np.testing.assert_allclose(out[..., 2], 0.02)


def test_zero_head_is_a_fixed_point(skel, dataset):
    wb, _ = dataset.batch([(0, 20)])
    init = InitNetwork(SMALL)(wb)
    desc = DescentNetwork(SMALL)
    desc.head.zero_()
    res = descend(init, wb, skel, desc, iterations=3, cfg=SMALL)
    assert len(res.trace) == 4 and not res.aborted
    for k in STATE_FIELDS:
        np.testing.assert_allclose(res.state.__dict__[k].data, res.trace[0].__dict__[k].data, atol=1e-12)


def test_oracle_descent_converges(skel, dataset):
    wb, tg = dataset.batch([(0, 20)])
    start = oracle_state(tg)
    start = DescentState(*(Tensor(getattr(start, k).data + 0.05) for k in STATE_FIELDS),
                         start.g, start.F_seq, start.ind)
    res = descend(start, wb, skel, OracleRefiner({k: getattr(tg, k) for k in STATE_FIELDS}), iterations=5)
    norms = [np.linalg.norm(s.S_proj.data) for s in res.trace]
    assert len(norms) == 6 and all(b < a for a, b in zip(norms, norms[1:]))


def test_non_finite_update_aborts(skel, dataset):
    wb, tg = dataset.batch([(0, 20)])
    calls = []

    def refiner(state, S_proj, S_contact):
        calls.append(1)
        bad = np.nan if len(calls) == 2 else 0.0
        return {k: np.full_like(getattr(state, k).data, bad) for k in STATE_FIELDS}

    res = descend(oracle_state(tg), wb, skel, refiner, iterations=3)
    assert res.aborted and len(res.trace) == 2
    assert all(np.isfinite(getattr(res.state, k).data).all() for k in STATE_FIELDS)


def _train(dataset, **kw):
    cfg = TrainConfig(seed=0, net=SMALL, views=1, frames=1, probe_batches=2, **kw)
    return train_toy(dataset, cfg)


def test_single_sequence_overfit(skel):
    hop = synthetic_hops(skel, 40, seed=2)
    ds = WindowDataset(skel, synthesize_proxy(skel, hop, num_cameras=1, noise=0.0, rng_seed=1), SMALL)
    res = _train(ds, stage1_steps=200, stage2_steps=0, lr=1e-3)
    before, after = res.stage1_probe
    assert after <= 0.1 * before


def test_zero_learning_rate_keeps_loss_constant(dataset):
    res = _train(dataset, stage1_steps=5, stage2_steps=3, lr=0.0, mask_rate=0.0)
    assert res.stage1_probe[0] == res.stage1_probe[1]
    assert res.stage2_probe[0] == res.stage2_probe[1]


def test_training_is_deterministic(dataset):
    a = _train(dataset, stage1_steps=4, stage2_steps=3)
    b = _train(dataset, stage1_steps=4, stage2_steps=3)
    assert a.stage1_curve == b.stage1_curve and a.stage2_curve == b.stage2_curve
