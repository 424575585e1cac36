import json

import numpy as np
import pytest

from proxymotion import formats
from proxymotion.config import CONFIG_ENV, Config, ConfigError, config_from_dict, load_config
from proxymotion.proxy import synthesize_proxy


def test_motion_round_trip_is_exact(tmp_path, skel, walk):
    formats.write_motion(tmp_path / "w.motion.jsonl", walk, skel)
    back, head = formats.read_motion(tmp_path / "w.motion.jsonl", skel)
    assert head["skeleton"] == skel.digest()
    for name in ("beta", "theta", "t", "g"):
        assert np.array_equal(getattr(back, name), getattr(walk, name))
    assert back.fps == walk.fps


def test_truncated_motion_rejected(tmp_path, skel, walk):
    path = tmp_path / "w.motion.jsonl"
    formats.write_motion(path, walk, skel)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(formats.FormatError, match="frames"):
        formats.read_motion(path)


def test_trajectory_round_trip(tmp_path, rng):
    joints = rng.normal(size=(5, 4, 3))
    formats.write_trajectory(tmp_path / "t.traj.jsonl", joints, 30.0, list("abcd"), (1, 2))
    back, head = formats.read_trajectory(tmp_path / "t.traj.jsonl")
    assert np.array_equal(back, joints)
    assert head["joint_names"] == list("abcd") and head["contact_ids"] == [1, 2]


def test_wrong_magic_rejected(tmp_path, rng):
    formats.write_trajectory(tmp_path / "t.jsonl", rng.normal(size=(2, 1, 3)), 30.0, ["a"])
    with pytest.raises(formats.FormatError):
        formats.read_motion(tmp_path / "t.jsonl")


def test_proxy_dataset_round_trip(tmp_path, skel, walk):
    proxies = synthesize_proxy(skel, walk, num_cameras=2, rng_seed=4, source_id="w")
    index, side = formats.write_proxy_dataset(tmp_path / "p.jsonl", proxies)
    back = formats.read_proxy_dataset(index)
    for p, q in zip(proxies, back):
        assert np.array_equal(p.joints2d, q.joints2d) and np.array_equal(p.confidence, q.confidence)
        assert np.array_equal(p.camera.R, q.camera.R) and p.camera.intrinsics == q.camera.intrinsics
        assert np.array_equal(p.canonical_gt.theta_H, q.canonical_gt.theta_H)
        assert q.source_id == "w"
    blob = bytearray(side.read_bytes())
    blob[100] ^= 1
    side.write_bytes(bytes(blob))
    with pytest.raises(formats.FormatError, match="checksum"):
        formats.read_proxy_dataset(index)


def test_defaults_without_a_file(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    assert load_config().digest() == Config().digest()


def test_environment_variable_names_the_config(tmp_path, monkeypatch):
    (tmp_path / "c.json").write_text(json.dumps({"seed": 11, "camera": {"num_cameras": 2}}))
    monkeypatch.setenv(CONFIG_ENV, str(tmp_path / "c.json"))
    cfg = load_config()
    assert cfg.seed == 11 and cfg.camera.num_cameras == 2
    assert cfg.digest() != Config().digest()


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="colour"):
        config_from_dict({"camera": {"colour": "red"}})
    with pytest.raises(ConfigError):
        config_from_dict({"camera": {"fov": [90.0, 30.0]}})
    with pytest.raises(ConfigError):
        config_from_dict({"noise": {"mode": "loud"}})


def test_bad_json_rejected(tmp_path):
    (tmp_path / "c.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.json")


def test_hash_ignores_thread_count():
    assert config_from_dict({"threads": 4}).digest() == Config().digest()
