"""Two-stage training of a small network on synthetic proxies.

Stage 1 fits the window initializer to the labels, stage 2 fits the
refiner that walks the estimate down the misalignment. A reduced network
keeps this to a few seconds; the full-size setting is the CLI default.
"""

import numpy as np

from proxymotion.motion_net import NetConfig, TrainConfig, WindowDataset, train_toy
from proxymotion.nn.gradcheck import run_suite
from proxymotion.proxy import synthesize_proxy
from proxymotion.skeleton import toy_skeleton
from proxymotion.synth import synthetic_hops, synthetic_walk

# the engine's backward passes agree with finite differences before anything is trained
bad = [r.name for r in run_suite() if not r.passed]
print("gradient checks:", "all pass" if not bad else f"failing {bad}")

skel = toy_skeleton()
motions = [synthetic_walk(skel, 90, seed=s) for s in range(3)] + [synthetic_hops(skel, 90, seed=s) for s in range(3)]
proxies = []
for i, m in enumerate(motions):
    proxies += synthesize_proxy(skel, m, num_cameras=2, rng_seed=i, source_id=f"m{i}")

net = NetConfig(window=27, hidden=32, dilations=(1, 3, 9), descent_tokens=4, descent_dim=16)
data = WindowDataset(skel, proxies, net, mask_rate=0.5, seed=0)
cfg = TrainConfig(seed=0, stage1_steps=150, stage2_steps=60, lr=1e-3, net=net)
res = train_toy(data, cfg)

for stage, (before, after), curve in (("stage 1", res.stage1_probe, res.stage1_curve),
                                      ("stage 2", res.stage2_probe, res.stage2_curve)):
    smooth = np.convolve(curve, np.ones(10) / 10, mode="valid")
    print(f"{stage}: probe loss {before:8.3f} -> {after:8.3f} ({100 * (1 - after / before):.0f}% lower); "
          f"running mean {smooth[0]:.3f} -> {smooth[-1]:.3f}")
