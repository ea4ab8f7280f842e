"""Additional proposal generation by interpolation and extrapolation.

A proposal set is split by a very low NMS threshold into the locally
highest-confidence members and the remainder. Each highest-confidence proposal
that overlaps its closest remainder proposal spawns two extra candidates: one
on the segment toward the neighbor and one on the ray beyond itself. Both
inherit the seed proposal's size, heading, and confidence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import Box3D, boxes_to_array, iou_matrix, nms


class Origin(enum.Enum):
    BASIC = "basic"
    INTERPOLATED = "interpolated"
    EXTRAPOLATED = "extrapolated"


@dataclass(frozen=True)
class Proposal:
    box: Box3D
    confidence: float
    origin: Origin = Origin.BASIC

    def __post_init__(self):
        c = float(self.confidence)
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {c}")
        object.__setattr__(self, "confidence", c)


@dataclass(frozen=True)
class IEConfig:
    """Interpolation/extrapolation knobs.

    ``t_iou`` gates generation on the overlap with the closest neighbor;
    ``lam`` is the deviation level along the center difference;
    ``nms_split_threshold`` is the low threshold used to pick the
    highest-confidence subset.
    """

    t_iou: float = 0.01
    lam: float = 0.5
    nms_split_threshold: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.t_iou <= 1.0:
            raise ValueError(f"t_iou must be in [0, 1], got {self.t_iou}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lam must be strictly inside (0, 1), got {self.lam}")
        if not 0.0 <= self.nms_split_threshold <= 1.0:
            raise ValueError(
                f"nms split threshold must be in [0, 1], got {self.nms_split_threshold}"
            )


def select_highest_confidence(
    props: list[Proposal], cfg: IEConfig
) -> tuple[list[int], list[int]]:
    """Partition proposal indices into (highest-confidence, remainder).

    The first list is the greedy 3D-IoU NMS survivor set at the split
    threshold, in descending-confidence order; the second is its complement in
    ascending index order.
    """
    if not props:
        raise ValueError("proposal set must be nonempty")
    boxes = [p.box for p in props]
    scores = [p.confidence for p in props]
    kept = nms(boxes, scores, cfg.nms_split_threshold, "3d")
    kept_set = set(kept)
    rest = [i for i in range(len(props)) if i not in kept_set]
    return kept, rest


def closest_proposal(i: Proposal, p_r: list[Proposal]) -> tuple[int, float] | None:
    """Index and IoU of the remainder proposal with maximal 3D IoU against
    ``i``; ties break to the lower index. None when the pool is empty or
    nothing overlaps."""
    if not p_r:
        return None
    ious = iou_matrix([i.box], [p.box for p in p_r], "3d")[0]
    j = int(np.argmax(ious))
    if ious[j] <= 0.0:
        return None
    return j, float(ious[j])


def _shifted(i: Proposal, j: Proposal, lam: float, sign: float, origin: Origin) -> Proposal:
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must be strictly inside (0, 1), got {lam}")
    oi = np.asarray(i.box.center)
    oj = np.asarray(j.box.center)
    center = oi + sign * lam * (oi - oj)
    box = Box3D(tuple(center), i.box.size, i.box.heading, i.box.category)
    return Proposal(box, i.confidence, origin)


def interpolate(i: Proposal, j: Proposal, lam: float) -> Proposal:
    """Proposal at o_i - lam*(o_i - o_j); size, heading, confidence from i."""
    return _shifted(i, j, lam, -1.0, Origin.INTERPOLATED)


def extrapolate(i: Proposal, j: Proposal, lam: float) -> Proposal:
    """Proposal at o_i + lam*(o_i - o_j); size, heading, confidence from i."""
    return _shifted(i, j, lam, 1.0, Origin.EXTRAPOLATED)


def augment_proposals(props: list[Proposal], cfg: IEConfig) -> list[Proposal]:
    """Append interpolated/extrapolated proposals to the input set.

    For each highest-confidence proposal whose closest remainder neighbor
    overlaps strictly above ``cfg.t_iou``, exactly two proposals are generated.
    The input order is preserved; generated proposals are appended.
    """
    if not props:
        return []
    p_h_idx, p_r_idx = select_highest_confidence(props, cfg)
    p_r = [props[j] for j in p_r_idx]
    generated: list[Proposal] = []
    if p_r:
        arr_h = boxes_to_array([props[k].box for k in p_h_idx])
        arr_r = boxes_to_array([p.box for p in p_r])
        ious = iou_matrix(arr_h, arr_r, "3d")
        for row, k in enumerate(p_h_idx):
            j = int(np.argmax(ious[row]))
            sigma = float(ious[row][j])
            if sigma <= 0.0 or sigma <= cfg.t_iou:
                continue
            generated.append(interpolate(props[k], p_r[j], cfg.lam))
            generated.append(extrapolate(props[k], p_r[j], cfg.lam))
    return list(props) + generated
