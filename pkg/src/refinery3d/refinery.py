"""Complementary augmentation of pseudo boxes.

A pseudo box is discarded, kept as high-confidence supervision, or (when its
confidence falls inside the threshold margin) resolved by a weighted coin flip
between removing its interior points and replacing it with a rescaled
high-confidence donor box. High-confidence boxes and replacement outputs are
cached in per-category databases so later frames can draw donors.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Box3D,
    PointCloud,
    ego_to_local,
    iou_3d,
    local_to_ego_scaled,
    points_in_box,
)

log = logging.getLogger(__name__)


class BoxClass(enum.Enum):
    DISCARD = "discard"
    HIGH_CONFIDENCE = "high_confidence"
    UNRELIABLE = "unreliable"


class Provenance(enum.Enum):
    DETECTOR = "detector"
    REPLACED = "replaced"


@dataclass(frozen=True)
class PseudoLabel:
    """A detector box with its IoU-confidence score and provenance."""

    box: Box3D
    confidence: float
    provenance: Provenance = Provenance.DETECTOR

    def __post_init__(self):
        c = float(self.confidence)
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {c}")
        object.__setattr__(self, "confidence", c)


@dataclass(frozen=True)
class ThresholdMargin:
    """Confidence margin [t_neg, t_pos] separating discard / unreliable / keep."""

    t_neg: float
    t_pos: float

    def __post_init__(self):
        if not (0.0 <= self.t_neg < self.t_pos <= 1.0):
            raise ValueError(
                f"margin must satisfy 0 <= t_neg < t_pos <= 1, got "
                f"[{self.t_neg}, {self.t_pos}]"
            )


#: A cached donor: the box plus its interior points in the box-local frame,
#: stored as an (M, 4) array (local x, y, z, intensity).
DonorEntry = tuple[Box3D, np.ndarray]


@dataclass
class HighConfDatabase:
    """Per-category stores of high-confidence donors and replacement outputs."""

    high: dict[str, list[DonorEntry]] = field(default_factory=dict)
    replaced: dict[str, list[DonorEntry]] = field(default_factory=dict)

    def add_high(self, entry: DonorEntry) -> None:
        self.high.setdefault(entry[0].category, []).append(entry)

    def add_replaced(self, entry: DonorEntry) -> None:
        self.replaced.setdefault(entry[0].category, []).append(entry)

    def sample_high(self, category: str, rng: np.random.Generator) -> DonorEntry | None:
        pool = self.high.get(category)
        if not pool:
            return None
        return pool[int(rng.integers(len(pool)))]

    def clear(self) -> None:
        self.high.clear()
        self.replaced.clear()

    def high_count(self) -> int:
        return sum(len(v) for v in self.high.values())


def classify_pseudo_box(u_b: float, margin: ThresholdMargin) -> BoxClass:
    """Place a confidence score relative to the margin (boundaries inclusive)."""
    u_b = float(u_b)
    if not 0.0 <= u_b <= 1.0:
        raise ValueError(f"confidence must be in [0, 1], got {u_b}")
    if u_b <= margin.t_neg:
        return BoxClass.DISCARD
    if u_b >= margin.t_pos:
        return BoxClass.HIGH_CONFIDENCE
    return BoxClass.UNRELIABLE


def replace_probability(u_b: float, margin: ThresholdMargin) -> float:
    """Probability of BoxReplace for an unreliable box: the confidence score
    normalized over the margin. The PointRemove probability is its complement."""
    u_b = float(u_b)
    if not margin.t_neg < u_b < margin.t_pos:
        raise ValueError(
            f"confidence {u_b} outside open margin ({margin.t_neg}, {margin.t_pos})"
        )
    return (u_b - margin.t_neg) / (margin.t_pos - margin.t_neg)


def choose_replace(u_b: float, margin: ThresholdMargin, rng: np.random.Generator) -> bool:
    """One weighted draw: True selects BoxReplace, False selects PointRemove."""
    return float(rng.random()) < replace_probability(u_b, margin)


def capture_local_points(cloud: PointCloud, box: Box3D) -> np.ndarray:
    """Snapshot the box's interior points in its local frame as (M, 4)."""
    idx = points_in_box(cloud, box)
    if idx.size == 0:
        return np.empty((0, 4))
    ego = cloud.points[idx]
    local = ego_to_local(ego[:, :3], box)
    return np.concatenate([local, ego[:, 3:4]], axis=1)


def point_remove(cloud: PointCloud, b: Box3D) -> PointCloud:
    """Delete every point inside the box, preserving survivor order."""
    idx = points_in_box(cloud, b)
    if idx.size == 0:
        return cloud
    keep = np.ones(cloud.count, dtype=bool)
    keep[idx] = False
    return PointCloud(cloud.points[keep])


def box_replace(
    cloud: PointCloud, b: PseudoLabel, b_h_entry: DonorEntry
) -> tuple[PointCloud, PseudoLabel]:
    """Replace an unreliable box with a rescaled high-confidence donor.

    The unreliable box's interior points are removed, the donor's cached local
    points are rescaled onto the unreliable box's extents and pasted at its
    pose (intensity carried through), and a replacement label at the
    unreliable box's pose is returned with confidence 1.
    """
    donor_box, donor_local = b_h_entry
    if donor_box.category != b.box.category:
        raise ValueError(
            f"donor category {donor_box.category!r} does not match "
            f"label category {b.box.category!r}"
        )
    cleared = point_remove(cloud, b.box)
    if donor_local.shape[0]:
        ego = local_to_ego_scaled(donor_local[:, :3], donor_box.size, b.box)
        pasted = np.concatenate([ego, donor_local[:, 3:4]], axis=1)
        merged = PointCloud(np.concatenate([cleared.points, pasted], axis=0))
    else:
        merged = cleared
    new_label = PseudoLabel(b.box, 1.0, Provenance.REPLACED)
    return merged, new_label


def refine_labels(
    cloud: PointCloud,
    labels: list[PseudoLabel],
    margin: ThresholdMargin,
    db: HighConfDatabase,
    rng: np.random.Generator,
) -> tuple[PointCloud, list[PseudoLabel]]:
    """Run complementary augmentation over one frame's pseudo labels.

    Labels are processed in order against the running cloud. Low-confidence
    labels are dropped. High-confidence labels are kept verbatim and cached as
    donors (box plus interior points in the local frame). Unreliable labels
    draw one uniform sample against the replace probability: BoxReplace when
    it wins and a same-category donor exists, PointRemove otherwise; the
    unreliable label itself never supervises. Returns the edited cloud and the
    frame's supervising labels (kept high-confidence plus replacements).
    """
    work = cloud
    supervising: list[PseudoLabel] = []
    for lb in labels:
        kind = classify_pseudo_box(lb.confidence, margin)
        if kind is BoxClass.DISCARD:
            continue
        if kind is BoxClass.HIGH_CONFIDENCE:
            db.add_high((lb.box, capture_local_points(work, lb.box)))
            supervising.append(lb)
            continue
        donor = None
        if choose_replace(lb.confidence, margin, rng):
            donor = db.sample_high(lb.box.category, rng)
        if donor is None:
            work = point_remove(work, lb.box)
        else:
            work, replacement = box_replace(work, lb, donor)
            scaled_local = donor[1].copy()
            if scaled_local.shape[0]:
                ratios = np.asarray(lb.box.size) / np.asarray(donor[0].size)
                scaled_local[:, :3] *= ratios
            db.add_replaced((replacement.box, scaled_local))
            supervising.append(replacement)
    _warn_on_paste_overlap(supervising)
    return work, supervising


def _warn_on_paste_overlap(labels: list[PseudoLabel], threshold: float = 0.1) -> None:
    replaced = [lb for lb in labels if lb.provenance is Provenance.REPLACED]
    for rep in replaced:
        for other in labels:
            if other is rep:
                continue
            if iou_3d(rep.box, other.box) >= threshold:
                log.warning(
                    "replacement box at %s overlaps another supervising box "
                    "(IoU >= %.2f)",
                    rep.box.center,
                    threshold,
                )
                break
