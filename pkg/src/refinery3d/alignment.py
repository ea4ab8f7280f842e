"""Cross-domain RoI-feature alignment losses.

Implements hardest-positive/hardest-negative mining over per-category feature
pools and the resulting intra-/inter-domain triplet losses. Losses are plain
scalars (sums over anchors); no gradients are involved. Feature batches can be
saved to / loaded from CSV for external plotting.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class Domain(enum.Enum):
    SOURCE = "source"
    TARGET = "target"


@dataclass(frozen=True)
class RoiFeature:
    """A fixed-length feature vector tagged with its domain and category."""

    vector: np.ndarray
    domain: Domain
    category: str

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError(f"feature vector must be 1-D, got shape {vec.shape}")
        if not np.isfinite(vec).all():
            raise ValueError("feature vector contains non-finite values")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class TripletConfig:
    alpha: float = 1.0
    eta: float = 0.1

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0, 1), got {self.eta}")


def _distance(a: RoiFeature, b: RoiFeature) -> float:
    if a.vector.shape != b.vector.shape:
        raise ValueError(
            f"feature dimension mismatch: {a.vector.shape} vs {b.vector.shape}"
        )
    return math.sqrt(float(np.sum((a.vector - b.vector) ** 2)))


def hardest_positive(anchor: RoiFeature, pool: list[RoiFeature]) -> int | None:
    """Index of the same-category pool member farthest from the anchor.

    The anchor object itself is skipped, so a pool drawn from the anchor's own
    domain never mines the anchor as its positive. Ties break to the lower
    index; None when no candidate exists.
    """
    best: int | None = None
    best_d = -math.inf
    for k, cand in enumerate(pool):
        if cand is anchor or cand.category != anchor.category:
            continue
        d = _distance(anchor, cand)
        if d > best_d:
            best, best_d = k, d
    return best


def hardest_negative(anchor: RoiFeature, pool: list[RoiFeature]) -> int | None:
    """Index of the different-category pool member closest to the anchor."""
    best: int | None = None
    best_d = math.inf
    for k, cand in enumerate(pool):
        if cand is anchor or cand.category == anchor.category:
            continue
        d = _distance(anchor, cand)
        if d < best_d:
            best, best_d = k, d
    return best


def triplet_loss_pair(
    d1_feats: list[RoiFeature], d2_feats: list[RoiFeature], alpha: float
) -> float:
    """Sum of hinge terms max(d(a,p) - d(a,n) + alpha, 0) over anchors in d1.

    Positives and negatives are mined from d2. Anchors lacking either a
    positive or a negative contribute zero.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    total = 0.0
    for anchor in d1_feats:
        p = hardest_positive(anchor, d2_feats)
        n = hardest_negative(anchor, d2_feats)
        if p is None or n is None:
            continue
        term = _distance(anchor, d2_feats[p]) - _distance(anchor, d2_feats[n]) + alpha
        if term > 0.0:
            total += term
    return total


def total_triplet_loss(
    source: list[RoiFeature], target: list[RoiFeature], alpha: float
) -> tuple[float, float, float]:
    """(intra, inter, total) triplet losses over the two domain batches.

    Intra sums the same-domain pairs (source,source) and (target,target);
    inter sums the cross-domain pairs (source,target) and (target,source).
    """
    l_intra = triplet_loss_pair(source, source, alpha) + triplet_loss_pair(
        target, target, alpha
    )
    l_inter = triplet_loss_pair(source, target, alpha) + triplet_loss_pair(
        target, source, alpha
    )
    return l_intra, l_inter, l_intra + l_inter


def combined_loss(det_loss: float, triplet_total: float, cfg: TripletConfig) -> float:
    """Detection loss plus the eta-weighted triplet total."""
    return float(det_loss) + cfg.eta * float(triplet_total)


def save_features(path: str | Path, feats: list[RoiFeature]) -> None:
    """Write features as CSV: domain, category, then the vector entries."""
    if feats:
        dim = feats[0].vector.shape[0]
        for f in feats:
            if f.vector.shape[0] != dim:
                raise ValueError("all feature vectors must share one dimension")
    else:
        dim = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["domain", "category"] + [f"f{i}" for i in range(dim)])
        for f in feats:
            writer.writerow(
                [f.domain.value, f.category] + [repr(float(v)) for v in f.vector]
            )


def load_features(path: str | Path) -> list[RoiFeature]:
    """Read a feature CSV written by :func:`save_features`."""
    out: list[RoiFeature] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["domain", "category"]:
            raise ValueError(f"{path}: not a feature CSV (bad header)")
        for row in reader:
            if not row:
                continue
            vec = np.array([float(v) for v in row[2:]])
            out.append(RoiFeature(vec, Domain(row[0]), row[1]))
    return out
