"""
Oriented-box geometry basics
============================

Boxes live in the ego frame as (center, size, heading, category). Everything
else - containment, rotated IoU, NMS - builds on two frame transforms.
"""

import numpy as np

from refinery3d import Box3D, PointCloud, ego_to_local, iou_3d, iou_bev, nms, points_in_box

# A car-sized box rotated 30 degrees, sitting on the ground plane.
car = Box3D(center=(10.0, 4.0, 0.8), size=(4.2, 1.9, 1.6), heading=np.pi / 6, category="Car")
print("car:", car)

# Ego-frame points map into the box-local frame; the box interior is just the
# axis-aligned region [-l/2, l/2] x [-w/2, w/2] x [-h/2, h/2] there.
probe = np.array([[10.0, 4.0, 0.8], [13.0, 4.0, 0.8]])
print("local coordinates:\n", ego_to_local(probe, car))

cloud = PointCloud(np.concatenate([probe, [[0.5], [0.5]]], axis=1))
print("inside indices:", points_in_box(cloud, car))

# Rotated IoU: exact polygon clipping in BEV, times the z-interval overlap.
shifted = Box3D((11.0, 4.3, 0.8), (4.2, 1.9, 1.6), np.pi / 6 + 0.1, "Car")
print(f"iou_3d = {iou_3d(car, shifted):.4f}   iou_bev = {iou_bev(car, shifted):.4f}")

# Greedy NMS keeps the best-scored box of each overlapping cluster.
cluster = [car, shifted, Box3D((40.0, 0.0, 0.8), (4.2, 1.9, 1.6), 0.0, "Car")]
keep = nms(cluster, scores=[0.7, 0.9, 0.5], iou_threshold=0.1)
print("nms kept indices (by descending score):", keep)
