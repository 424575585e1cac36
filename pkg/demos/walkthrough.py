"""From a synthetic walk to world-space metrics, one step at a time.

Run with ``python demos/walkthrough.py``. Everything is seeded, so the
printed numbers are the same on every run.
"""

import numpy as np

from proxymotion import coords
from proxymotion.cli import run_sequence
from proxymotion.config import Config
from proxymotion.eval.metrics import metric_suite
from proxymotion.proxy import mask_failures, synthesize_proxy
from proxymotion.skeleton import motion_joints, toy_skeleton
from proxymotion.synth import synthetic_hops, synthetic_walk

skel = toy_skeleton()
walk = synthetic_walk(skel, 240, seed=0)
J_root = skel.root_position(walk.beta)
print(f"walk: {len(walk)} frames at {walk.fps:g} fps, {skel.joint_count} joints")

# four virtual cameras, each standing still for the whole clip
proxies = synthesize_proxy(skel, walk, num_cameras=4, noise=0.0, rng_seed=1, follow=False, source_id="walk")
for i, p in enumerate(proxies):
    seen = (p.confidence > 0).mean()
    print(f"camera {i}: fov {p.camera.intrinsics.fov_deg:5.1f} deg, keypoints visible {100 * seen:5.1f}%")

# contact labels come from the motion, not the camera; the toy walk glides,
# so its feet are rarely planted, while the hops stand still between jumps
planted = (proxies[0].contact >= 0.5).mean(axis=0)
print("walk: planted fraction per contact joint:", np.round(planted, 2))
hops = synthesize_proxy(skel, synthetic_hops(skel, 240, seed=0), num_cameras=1, rng_seed=1)[0]
print("hops: planted fraction per contact joint:", np.round((hops.contact >= 0.5).mean(axis=0), 2))

# the human-centric labels are the same whichever camera looks at the walk
a, b = proxies[0].canonical_gt, proxies[1].canonical_gt
print("label gap between cameras:", float(np.abs(a.theta_H - b.theta_H).max()))

# detection failures hide about half the frames, hands more often
masked = mask_failures(proxies[0], 0.5, rng_seed=2)
print(f"masked keypoints: body {100 * (masked.confidence[:, :22] == 0).mean():.1f}%, "
      f"hands {100 * (masked.confidence[:, 22:] == 0).mean():.1f}%")

# descent with an oracle in place of the learned refiner, then world accumulation
net_cfg = Config().network.build(skel.contact_joint_ids)
joints, world, trace = run_sequence(skel, proxies[0], net_cfg)
print(f"descent on {len(trace['frames'])} windows, final |S_proj| max {max(trace['s_proj_norm'][-1]):.2e}")

half = net_cfg.window // 2
gt = motion_joints(skel, coords.canonicalize(walk, J_root))[half:len(walk) - half]
report = metric_suite(joints, gt, walk.fps)
print(f"W-MPJPE {report.w_mpjpe:.2e} mm, WA-MPJPE {report.wa_mpjpe:.2e} mm, PA-MPJPE {report.pa_mpjpe:.2e} mm")
print("GP %:", report.gp)
print("FF %:", [round(x, 1) for x in report.ff])
