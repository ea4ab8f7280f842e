"""Independent brute-force references used by the test suite.

Everything here is deliberately written the slow, obvious way (scalar loops,
direct formulas) so it cannot share a failure mode with the vectorized
library paths it checks.
"""

import math

import numpy as np


def point_in_box_ref(p, center, size, heading) -> bool:
    """Scalar containment check via explicit trig, closed boundaries."""
    dx = p[0] - center[0]
    dy = p[1] - center[1]
    dz = p[2] - center[2]
    c, s = math.cos(heading), math.sin(heading)
    # row vector times the z-rotation matrix
    lx = dx * c + dy * s
    ly = -dx * s + dy * c
    return (
        abs(lx) <= size[0] / 2 + 1e-15
        and abs(ly) <= size[1] / 2 + 1e-15
        and abs(dz) <= size[2] / 2 + 1e-15
    )


def box_corners_3d(center, size, heading) -> np.ndarray:
    """All 8 corners of an upright oriented box."""
    c, s = math.cos(heading), math.sin(heading)
    out = []
    for sx in (-0.5, 0.5):
        for sy in (-0.5, 0.5):
            for sz in (-0.5, 0.5):
                lx, ly, lz = sx * size[0], sy * size[1], sz * size[2]
                out.append(
                    (
                        lx * c - ly * s + center[0],
                        lx * s + ly * c + center[1],
                        lz + center[2],
                    )
                )
    return np.array(out)


def mc_iou_3d(box_a, box_b, n_samples: int, rng: np.random.Generator) -> float:
    """Monte-Carlo IoU: uniform samples over the union's bounding box."""
    corners = np.vstack(
        [
            box_corners_3d(box_a.center, box_a.size, box_a.heading),
            box_corners_3d(box_b.center, box_b.size, box_b.heading),
        ]
    )
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    pts = rng.uniform(lo, hi, size=(n_samples, 3))

    def mask(box):
        d = pts - np.asarray(box.center)
        c, s = math.cos(box.heading), math.sin(box.heading)
        lx = d[:, 0] * c + d[:, 1] * s
        ly = -d[:, 0] * s + d[:, 1] * c
        half = np.asarray(box.size) / 2
        return (
            (np.abs(lx) <= half[0]) & (np.abs(ly) <= half[1]) & (np.abs(d[:, 2]) <= half[2])
        )

    in_a, in_b = mask(box_a), mask(box_b)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


def greedy_nms_ref(boxes, scores, threshold, pair_iou) -> list[int]:
    """Textbook greedy NMS: visit by descending score (ties by index), keep an
    index iff its IoU with every kept index stays below the threshold."""
    order = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    kept: list[int] = []
    for i in order:
        if all(pair_iou(boxes[i], boxes[k]) < threshold for k in kept):
            kept.append(i)
    return kept


def distance_table(feats_a, feats_b) -> np.ndarray:
    """Dense pairwise Euclidean distances between two feature lists."""
    table = np.empty((len(feats_a), len(feats_b)))
    for i, fa in enumerate(feats_a):
        for j, fb in enumerate(feats_b):
            table[i, j] = math.sqrt(float(np.sum((fa.vector - fb.vector) ** 2)))
    return table


def mine_ref(anchor_idx, d1_feats, d2_feats, table):
    """(hardest positive index, hardest negative index) by exhaustive scan.

    Identity exclusion mirrors the library contract: a candidate that IS the
    anchor object is skipped.
    """
    anchor = d1_feats[anchor_idx]
    p_best, p_dist = None, -math.inf
    n_best, n_dist = None, math.inf
    for j, cand in enumerate(d2_feats):
        if cand is anchor:
            continue
        d = table[anchor_idx, j]
        if cand.category == anchor.category:
            if d > p_dist:
                p_best, p_dist = j, d
        else:
            if d < n_dist:
                n_best, n_dist = j, d
    return p_best, n_best


def triplet_loss_ref(d1_feats, d2_feats, alpha) -> float:
    """Exhaustive hinge-sum over anchors in input order."""
    table = distance_table(d1_feats, d2_feats)
    total = 0.0
    for a_idx in range(len(d1_feats)):
        p, n = mine_ref(a_idx, d1_feats, d2_feats, table)
        if p is None or n is None:
            continue
        total += max(table[a_idx, p] - table[a_idx, n] + alpha, 0.0)
    return total
