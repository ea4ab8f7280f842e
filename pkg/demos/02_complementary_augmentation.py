"""
Complementary augmentation of unreliable pseudo boxes
=====================================================

Pseudo boxes are sorted by their confidence against a threshold margin:
below it they are discarded, above it they are kept and cached as donors,
and inside it they are resolved by a weighted coin flip between removing
their points (PointRemove) and pasting a rescaled donor (BoxReplace).
"""

import numpy as np

from refinery3d import (
    HighConfDatabase,
    ThresholdMargin,
    classify_pseudo_box,
    refine_labels,
    replace_probability,
)
from refinery3d.harness import OracleConfig, default_target_scene, generate_scene, pseudo_labels, stream

margin = ThresholdMargin(0.25, 0.6)

# The decision for a single confidence score:
for u in (0.15, 0.4, 0.55, 0.9):
    kind = classify_pseudo_box(u, margin)
    line = f"u_b = {u:.2f} -> {kind.value}"
    if kind.value == "unreliable":
        line += f"   P(BoxReplace) = {replace_probability(u, margin):.3f}"
    print(line)

# A synthetic target frame and one noisy detector pass over it:
cloud, gts = generate_scene(default_target_scene(), stream(0, 2, 0))
labels = pseudo_labels(cloud, gts, OracleConfig(), stream(0, 3, 0))
print(f"\nframe: {cloud.count} points, {len(gts)} ground truths, {len(labels)} pseudo labels")

db = HighConfDatabase()
refined_cloud, supervising = refine_labels(cloud, labels, margin, db, np.random.default_rng(1))
print(f"after augmentation: {refined_cloud.count} points, {len(supervising)} supervising labels")
print(f"donor database: {db.high_count()} high-confidence entries")
for lb in supervising:
    print(f"  {lb.box.category:10s} confidence={lb.confidence:.3f} provenance={lb.provenance.value}")
