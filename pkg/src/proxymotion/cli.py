"""Command-line entry point: ``proxymotion <command> [options]``.

Commands
    synth-motion  write procedural motions in the motion file format
    gen-proxy     render motions into a proxy dataset plus manifest
    train         two-stage toy training, writes a weight file
    descend       run initializer + descent per window, write world trajectories
    eval          metrics of a predicted trajectory against ground truth
    gradcheck     finite-difference check of every registered op

Exit codes: 0 success, 2 input error, 3 numeric failure, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import coords, formats, motion_net as mn
from .config import Config, ConfigError, load_config
from .coords import InvariantError
from .eval.metrics import metric_suite
from .nn import gradcheck
from .nn.tensor import no_grad
from .nn.weights_io import WeightFileError, load_weights, save_weights
from .proxy import BODY_FPS, resample_motion, synthesize_proxy
from .skeleton import (ParametricSkeleton, SkeletonError, forward_kinematics_arrays, load_skeleton,
                       motion_joints, toy_skeleton)
from . import rotations
from .synth import synthetic_hops, synthetic_walk

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4


class InputError(Exception):
    pass


def _skeleton(cfg: Config) -> ParametricSkeleton:
    if cfg.skeleton is None:
        return toy_skeleton()
    try:
        return load_skeleton(cfg.skeleton)
    except OSError as exc:
        raise InputError(f"cannot read skeleton {cfg.skeleton}: {exc}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- synth-motion ---------------------------------------------------------------------------
def cmd_synth_motion(args, cfg: Config) -> int:
    skel = _skeleton(cfg)
    out = Path(args.out)
    maker = {"walk": synthetic_walk, "hops": synthetic_hops}[args.kind]
    seed = cfg.seed if args.seed is None else args.seed
    if seed is None:
        raise InputError("synth-motion needs --seed (or a seed in the config)")
    seqs = np.random.SeedSequence(seed).generate_state(args.count)
    for i, s in enumerate(seqs):
        motion = maker(skel, args.frames, BODY_FPS, int(s))
        formats.write_motion(out / f"{args.kind}_{i:03d}.motion.jsonl", motion, skel)
    print(f"wrote {args.count} motion file(s) to {out}")
    return EXIT_OK


# -- gen-proxy -------------------------------------------------------------------------------
def _gen_one(job):
    path, seed, skel, cfg = job
    try:
        motion, _ = formats.read_motion(path, skel)
    except (formats.FormatError, SkeletonError) as exc:
        return path, None, str(exc)
    if motion.fps != BODY_FPS:
        motion = resample_motion(motion, BODY_FPS)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        proxies = synthesize_proxy(skel, motion, cfg.camera.num_cameras, cfg.noise.value, cfg.noise.mode, seed,
                                   ranges=cfg.camera.ranges(), contact_params=cfg.contact,
                                   follow=cfg.camera.follow, num_waypoints=cfg.camera.num_waypoints,
                                   source_id=Path(path).name)
    notes = [str(w.message) for w in caught]
    return path, proxies, notes


def cmd_gen_proxy(args, cfg: Config) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    if seed is None:
        raise InputError("gen-proxy needs --seed (or a seed in the config)")
    skel = _skeleton(cfg)
    src = Path(args.motions)
    if not src.exists():
        raise InputError(f"motion path {src} does not exist")
    files = formats.list_motion_files(src)
    children = np.random.SeedSequence(seed).generate_state(len(files))
    jobs = [(str(f), int(c), skel, cfg) for f, c in zip(files, children)]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(_gen_one, jobs))
    proxies, failed, notes = [], [], []
    for path, seqs, info in results:
        if seqs is None:
            failed.append({"file": Path(path).name, "error": info})
            continue
        proxies.extend(seqs)
        notes.extend(info)
    out = Path(args.out)
    index, side = formats.write_proxy_dataset(out / "proxies.jsonl", proxies)
    manifest = {
        "seed": seed, "config_hash": cfg.digest(), "skeleton": skel.digest(),
        "motions_read": len(files) - len(failed), "motions_failed": failed,
        "sequences": len(proxies), "cameras_per_motion": cfg.camera.num_cameras,
        "files": {index.name: formats.file_digest(index), side.name: formats.file_digest(side)},
        "warnings": notes,
    }
    formats.atomic_write_text(out / "manifest.json", _dump(manifest))
    print(f"{len(proxies)} proxy sequence(s) from {len(files) - len(failed)} motion(s); {len(failed)} failed")
    return EXIT_OK


# -- train ----------------------------------------------------------------------------------
def _read_proxies(path):
    try:
        return formats.read_proxy_dataset(path)
    except (formats.FormatError, WeightFileError, KeyError) as exc:
        raise InputError(str(exc)) from exc


def cmd_train(args, cfg: Config) -> int:
    skel = _skeleton(cfg)
    proxies = _read_proxies(args.proxies)
    tcfg = cfg.train_config(skel.contact_joint_ids)
    if args.seed is not None:
        tcfg.seed = args.seed
    ds = mn.WindowDataset(skel, proxies, tcfg.net, tcfg.mask_rate, tcfg.seed)
    result = mn.train_toy(ds, tcfg)
    out = Path(args.out)
    arrays = {f"init.{k}": v for k, v in result.init_net.state_dict().items()}
    arrays.update({f"descent.{k}": v for k, v in result.descent_net.state_dict().items()})
    save_weights(out / "weights.pxw", arrays)
    curves = {"stage1": result.stage1_curve, "stage2": result.stage2_curve,
              "stage1_probe": list(result.stage1_probe), "stage2_probe": list(result.stage2_probe),
              "config_hash": cfg.digest(), "seed": tcfg.seed}
    formats.atomic_write_text(out / "loss_curve.json", _dump(curves))
    print(f"stage 1 probe {result.stage1_probe[0]:.4g} -> {result.stage1_probe[1]:.4g}; "
          f"stage 2 probe {result.stage2_probe[0]:.4g} -> {result.stage2_probe[1]:.4g}")
    return EXIT_OK


# -- descend ---------------------------------------------------------------------------------
def load_networks(path, net_cfg: mn.NetConfig):
    try:
        arrays = load_weights(path)
    except OSError as exc:
        raise InputError(f"cannot read weights {path}: {exc}") from exc
    except WeightFileError as exc:
        raise InputError(f"{path}: {exc}") from exc
    init, desc = mn.InitNetwork(net_cfg), mn.DescentNetwork(net_cfg)
    try:
        init.load_state_dict({k[5:]: v for k, v in arrays.items() if k.startswith("init.")})
        desc.load_state_dict({k[8:]: v for k, v in arrays.items() if k.startswith("descent.")})
    except (KeyError, ValueError) as exc:
        raise InputError(f"weights {path} do not fit the configured network: {exc}") from exc
    return init, desc


def _world_joints(skel, beta, world: coords.WorldTrack, theta_H, g):
    theta = np.array(theta_H, copy=True)
    theta[:, 0] = world.theta[:, 0]
    return forward_kinematics_arrays(skel, beta, theta, world.t, g)


def run_sequence(skel, proxy, net_cfg: mn.NetConfig, init=None, desc=None, iterations: int = 3):
    """Per-window prediction of every centre frame, accumulated into world space.

    With ``init is None`` the ground-truth labels stand in for the network
    output (oracle mode) and the refiner steps halfway to them.
    Returns ``(world_joints, world_track, trace)``.
    """
    half = net_cfg.window // 2
    n = len(proxy)
    centres = np.arange(half, n - half)
    ds = mn.WindowDataset(skel, [proxy], net_cfg)
    entries = [(0, int(c)) for c in centres]
    wb, tg = ds.batch(entries)
    J_root = skel.root_position(proxy.beta)
    with no_grad():
        if init is None:
            start = mn.oracle_state(tg, net_cfg.feature_dim)
            refiner = mn.OracleRefiner({k: getattr(tg, k) for k in mn.STATE_FIELDS})
        else:
            pred = init(wb)
            start = mn.DescentState.from_init(pred)
            s0 = start.numpy()
            R_H0 = rotations.rot6d_to_matrix(s0["R6"])
            world0 = coords.accumulate(s0["theta"], s0["t"], R_H0, s0["T"], J_root)
            jw = _world_joints(skel, proxy.beta, world0, s0["theta"], s0["g"])[:, list(net_cfg.contact_ids)]
            prev = np.full_like(jw, np.nan)
            prev[1:] = np.einsum("fij,fcj->fci", world0.R_front[1:], jw[:-1] - world0.t_xz[1:, None])
            wb.prev_contact = prev
            refiner = desc
        result = mn.descend(start, wb, skel, refiner, iterations, net_cfg)
    final = result.state.numpy()
    R_H = rotations.rot6d_to_matrix(final["R6"])
    world = coords.accumulate(final["theta"], final["t"], R_H, final["T"], J_root)
    joints = _world_joints(skel, proxy.beta, world, final["theta"], final["g"])
    trace = {
        "frames": [int(c) for c in centres],
        "s_proj_norm": [np.linalg.norm(s.S_proj.data.reshape(len(centres), -1), axis=1).tolist()
                        for s in result.trace],
        "behind_camera": [i.behind_camera.tolist() for i in result.info],
        "aborted": bool(result.aborted),
    }
    return joints, world, trace


def cmd_descend(args, cfg: Config) -> int:
    skel = _skeleton(cfg)
    net_cfg = cfg.network.build(skel.contact_joint_ids)
    proxies = _read_proxies(args.proxies)
    if args.weights == "oracle":
        init = desc = None
    else:
        init, desc = load_networks(args.weights, net_cfg)
    out = Path(args.out)
    summary = {"weights": args.weights, "config_hash": cfg.digest(), "sequences": [], "skipped": []}
    for i, p in enumerate(proxies):
        name = f"seq{i:05d}"
        if len(p) < net_cfg.window:
            summary["skipped"].append({"sequence": name, "reason": f"{len(p)} frames < window {net_cfg.window}"})
            continue
        joints, world, trace = run_sequence(skel, p, net_cfg, init, desc, net_cfg.iterations)
        if trace["aborted"]:
            summary["skipped"].append({"sequence": name, "reason": "non-finite descent update"})
        formats.write_trajectory(out / f"{name}.traj.jsonl", joints, p.fps, skel.names, skel.contact_joint_ids,
                                 world.R, world.T, {"source_id": p.source_id, "first_frame": trace["frames"][0]})
        formats.atomic_write_text(out / f"{name}.trace.json", _dump(trace))
        summary["sequences"].append({"sequence": name, "source_id": p.source_id, "frames": len(joints)})
    formats.atomic_write_text(out / "summary.json", _dump(summary))
    print(f"{len(summary['sequences'])} trajectory file(s), {len(summary['skipped'])} skipped")
    return EXIT_OK


# -- gt export helper -----------------------------------------------------------------------
def cmd_export_gt(args, cfg: Config) -> int:
    """Write the canonical ground-truth world joints of proxy sequences as trajectories."""
    skel = _skeleton(cfg)
    half = cfg.network.window // 2
    for i, p in enumerate(_read_proxies(args.proxies)):
        gt = p.canonical_gt
        theta = gt.theta_H.copy()
        root = rotations.axis_angle_to_matrix(gt.theta_H[:, 0])
        theta[:, 0] = rotations.matrix_to_axis_angle(np.einsum("fji,fjk->fik", gt.heading, root))
        J_root = skel.root_position(p.beta)
        t = np.einsum("fji,fj->fi", gt.heading, gt.t_H + J_root) + gt.origin - J_root
        joints = forward_kinematics_arrays(skel, p.beta, theta, t, p.g)
        if args.crop:
            joints = joints[half:len(p) - half]
        formats.write_trajectory(Path(args.out) / f"seq{i:05d}.gt.traj.jsonl", joints, p.fps, skel.names,
                                 skel.contact_joint_ids, extra={"source_id": p.source_id})
    return EXIT_OK


# -- eval ------------------------------------------------------------------------------------
def cmd_eval(args, cfg: Config) -> int:
    try:
        pred, ph = formats.read_trajectory(args.pred)
        gt, gh = formats.read_trajectory(args.gt)
    except formats.FormatError as exc:
        raise InputError(str(exc)) from exc
    for k, (a, b) in enumerate(zip(ph["joint_names"], gh["joint_names"])):
        if a != b:
            raise InputError(f"joint layouts differ at index {k}: pred {a!r} vs gt {b!r}")
    if len(ph["joint_names"]) != len(gh["joint_names"]):
        k = min(len(ph["joint_names"]), len(gh["joint_names"]))
        raise InputError(f"joint layouts differ at index {k}: pred has {len(ph['joint_names'])} joints, "
                         f"gt has {len(gh['joint_names'])}")
    if len(pred) != len(gt):
        raise InputError(f"frame counts differ: pred {len(pred)} vs gt {len(gt)}")
    report = metric_suite(pred, gt, gh["fps"], gh.get("contact_ids") or (), with_scale=args.with_scale,
                          pa_mode=args.pa_mode)
    out = Path(args.out)
    formats.atomic_write_text(out / "report.json", report.to_json() + "\n")
    formats.atomic_write_text(out / "gp_ff.csv", report.sweep_csv())
    print(report.to_json())
    return EXIT_OK


# -- gradcheck -------------------------------------------------------------------------------
def cmd_gradcheck(args, cfg: Config) -> int:
    seed = 0 if args.seed is None else args.seed
    results = gradcheck.run_suite(seed=seed, fault=args.inject_fault)
    width = max(len(r.name) for r in results)
    lines = [f"{'op':<{width}}  max_rel_error  status"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.max_rel_error:13.3e}  {'PASS' if r.passed else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        formats.atomic_write_text(Path(args.out) / "gradcheck.txt", text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


# -- entry point ----------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (default: $PROXYMOTION_CONFIG)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--threads", type=int, help="worker threads (overrides the config)")
    common.add_argument("--out", help="output directory")

    parser = argparse.ArgumentParser(prog="proxymotion", description="Proxy-to-motion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-motion", parents=[common], help="write procedural motion files")
    p.add_argument("--kind", choices=("walk", "hops"), default="walk")
    p.add_argument("--frames", type=int, default=240)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_synth_motion, needs_out=True)

    p = sub.add_parser("gen-proxy", parents=[common], help="render motions into a proxy dataset")
    p.add_argument("motions", help="motion file or directory of motion files")
    p.set_defaults(func=cmd_gen_proxy, needs_out=True)

    p = sub.add_parser("train", parents=[common], help="two-stage toy training")
    p.add_argument("proxies", help="proxy dataset index (.jsonl)")
    p.set_defaults(func=cmd_train, needs_out=True)

    p = sub.add_parser("descend", parents=[common], help="predict world trajectories")
    p.add_argument("proxies", help="proxy dataset index (.jsonl)")
    p.add_argument("--weights", required=True, help="weight file, or 'oracle' to use ground-truth labels")
    p.set_defaults(func=cmd_descend, needs_out=True)

    p = sub.add_parser("export-gt", parents=[common], help="write ground-truth world joints of a proxy dataset")
    p.add_argument("proxies", help="proxy dataset index (.jsonl)")
    p.add_argument("--crop", action="store_true", help="drop the frames a window cannot centre on")
    p.set_defaults(func=cmd_export_gt, needs_out=True)

    p = sub.add_parser("eval", parents=[common], help="metrics of a trajectory against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--with-scale", action="store_true", help="similarity instead of rigid alignment")
    p.add_argument("--pa-mode", choices=("procrustes", "gt_root"), default="procrustes")
    p.set_defaults(func=cmd_eval, needs_out=True)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of all ops")
    p.add_argument("--inject-fault", metavar="OP", help="sabotage OP's backward (negative control)")
    p.set_defaults(func=cmd_gradcheck, needs_out=False)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        cfg.validate()
        if args.needs_out and not args.out:
            raise InputError(f"{args.command} needs --out")
        return args.func(args, cfg)
    except (InputError, ConfigError, formats.FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (mn.TrainingDivergedError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvariantError, SkeletonError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
