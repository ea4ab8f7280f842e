"""Detection metrics: greedy matching, AP over 40 recall positions, Closed Gap.

Matching is category-aware, one-to-one, and greedy in descending score order,
the standard KITTI behavior. AP interpolates precision at 40 evenly spaced
recall positions (1/40 .. 40/40) and reports a percentage.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .geometry import Box3D, iou_matrix

DEFAULT_IOU_THRESHOLDS = {"Car": 0.7, "Pedestrian": 0.5, "Cyclist": 0.5}

RECALL_POSITIONS = 40


class UndefinedMetricError(ValueError):
    """The metric is undefined for the given inputs (e.g. no ground truths)."""


@dataclass(frozen=True)
class Detection:
    box: Box3D
    score: float
    frame_id: int

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")


@dataclass(frozen=True)
class GroundTruth:
    box: Box3D
    frame_id: int


def match_detections(
    dets: list[Detection],
    gts: list[GroundTruth],
    iou_thr: float,
    iou_kind: str = "3d",
) -> list[bool]:
    """Greedy TP/FP assignment, returned in the order of ``dets``.

    Detections are visited in descending score order (ties by input index).
    A detection is a true positive iff the best-IoU not-yet-matched ground
    truth of the same category in its frame reaches the threshold; each ground
    truth matches at most once.
    """
    flags = [False] * len(dets)
    if not dets:
        return flags

    # IoU matrices are built once per (frame, category) group; the greedy pass
    # then only reads rows, keeping the per-detection cost flat.
    det_groups: dict[tuple[int, str], list[int]] = defaultdict(list)
    gt_groups: dict[tuple[int, str], list[int]] = defaultdict(list)
    for d_idx, det in enumerate(dets):
        det_groups[(det.frame_id, det.box.category)].append(d_idx)
    for g_idx, gt in enumerate(gts):
        gt_groups[(gt.frame_id, gt.box.category)].append(g_idx)

    matrices: dict[tuple[int, str], np.ndarray] = {}
    det_pos: dict[int, int] = {}
    for key, d_idxs in det_groups.items():
        g_idxs = gt_groups.get(key)
        if not g_idxs:
            continue
        matrices[key] = iou_matrix(
            [dets[i].box for i in d_idxs], [gts[i].box for i in g_idxs], iou_kind
        )
        for pos, d_idx in enumerate(d_idxs):
            det_pos[d_idx] = pos

    matched = [False] * len(gts)
    order = np.argsort(-np.asarray([d.score for d in dets]), kind="stable")
    for d_idx in order:
        d_idx = int(d_idx)
        det = dets[d_idx]
        key = (det.frame_id, det.box.category)
        if key not in matrices:
            continue
        row = matrices[key][det_pos[d_idx]]
        g_idxs = gt_groups[key]
        open_pos = [p for p in range(len(g_idxs)) if not matched[g_idxs[p]]]
        if not open_pos:
            continue
        best = max(open_pos, key=lambda p: row[p])
        if row[best] >= iou_thr:
            flags[d_idx] = True
            matched[g_idxs[best]] = True
    return flags


def average_precision_r40(tp_flags: list[bool], num_gt: int) -> float:
    """AP over 40 recall positions, in percent.

    ``tp_flags`` must be ordered by descending detection score. Precision at a
    sampled recall r is the maximum precision attained at any recall >= r.
    """
    if num_gt <= 0:
        raise UndefinedMetricError("AP undefined with zero ground truths")
    if not tp_flags:
        return 0.0
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64))
    fp = np.cumsum(~np.asarray(tp_flags, dtype=bool))
    recall = tp / num_gt
    precision = tp / (tp + fp)

    total = 0.0
    for k in range(1, RECALL_POSITIONS + 1):
        r = k / RECALL_POSITIONS
        reachable = precision[recall >= r]
        total += float(reachable.max()) if reachable.size else 0.0
    return 100.0 * total / RECALL_POSITIONS


def closed_gap(ap_model: float, ap_source_only: float, ap_oracle: float) -> float:
    """Percentage of the source-only-to-oracle gap closed by the model."""
    denom = ap_oracle - ap_source_only
    if denom == 0.0:
        raise UndefinedMetricError(
            "closed gap undefined when oracle and source-only AP coincide"
        )
    return (ap_model - ap_source_only) / denom * 100.0


def evaluate_category(
    dets: list[Detection],
    gts: list[GroundTruth],
    category: str,
    iou_thr: float,
    iou_kind: str = "3d",
) -> float:
    """AP@R40 for one category at one IoU threshold."""
    cat_dets = [d for d in dets if d.box.category == category]
    cat_gts = [g for g in gts if g.box.category == category]
    if not cat_gts:
        raise UndefinedMetricError(f"no ground truths for category {category!r}")
    flags = match_detections(cat_dets, cat_gts, iou_thr, iou_kind)
    order = np.argsort(-np.asarray([d.score for d in cat_dets]), kind="stable")
    sorted_flags = [flags[int(i)] for i in order]
    return average_precision_r40(sorted_flags, len(cat_gts))


def evaluate_detections(
    dets: list[Detection],
    gts: list[GroundTruth],
    thresholds: dict[str, float] | None = None,
) -> dict[str, dict[str, float]]:
    """Per-category {'ap_bev': ..., 'ap_3d': ...} for categories with ground
    truths, using per-category IoU thresholds (KITTI defaults)."""
    thresholds = thresholds or DEFAULT_IOU_THRESHOLDS
    categories = sorted({g.box.category for g in gts})
    results: dict[str, dict[str, float]] = {}
    for cat in categories:
        thr = thresholds.get(cat, 0.5)
        results[cat] = {
            "ap_bev": evaluate_category(dets, gts, cat, thr, "bev"),
            "ap_3d": evaluate_category(dets, gts, cat, thr, "3d"),
        }
    return results


def mean_ap(results: dict[str, dict[str, float]], key: str) -> float:
    """Average one AP column over the categories present."""
    if not results:
        return 0.0
    return float(np.mean([v[key] for v in results.values()]))
