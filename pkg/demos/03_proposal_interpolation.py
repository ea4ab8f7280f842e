"""
Interpolated and extrapolated proposals
=======================================

Low-beam point clouds pull detector proposals toward point-rich regions.
Splitting the proposal set with a very low NMS threshold and generating two
extra candidates per cluster - one toward the closest neighbor, one pushed
beyond - recovers part of that localization error for free.
"""

import numpy as np

from refinery3d import IEConfig, augment_proposals, iou_matrix
from refinery3d.harness import (
    OracleConfig,
    default_target_scene,
    density_offsets,
    generate_scene,
    oracle_detector,
    stream,
)

scene = default_target_scene()
oracle = OracleConfig()  # biased: centers drift toward local point density
ie = IEConfig(t_iou=0.01, lam=0.5)

improved, total = 0, 0
gain = []
for f in range(200):
    cloud, gts = generate_scene(scene, stream(5, 2, f))
    offsets = density_offsets(cloud, gts, oracle.bias_radius)
    props = oracle_detector(cloud, gts, oracle, stream(5, 5, f), count=4, bias_offsets=offsets)
    if not props:
        continue
    augmented = augment_proposals(props, ie)
    before = iou_matrix([p.box for p in props], gts, "3d").max(axis=0)
    after = iou_matrix([p.box for p in augmented], gts, "3d").max(axis=0)
    improved += int((after > before).sum())
    total += len(gts)
    gain.append(after - before)

gain = np.concatenate(gain)
print(f"proposals per frame grow by 2 per qualifying cluster (lam={ie.lam})")
print(f"best-proposal IoU never drops: min delta = {gain.min():.2e}")
print(f"strictly improved ground truths: {improved}/{total} = {improved/total:.1%}")
print(f"mean IoU gain where improved: {gain[gain > 0].mean():.4f}")
