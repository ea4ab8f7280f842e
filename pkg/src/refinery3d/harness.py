"""Desk-scale self-training harness.

Two synthetic LiDAR-like domains with different per-instance point counts, a
noisy oracle detector standing in for a two-stage network, and the iterative
select-then-train loop: pseudo labels are regenerated every ``k`` epochs with
the oracle's error parameters attenuated in proportion to the measured quality
of the supervision, modeling a detector that improves when trained on better
labels. Everything is driven by explicit seeds and is bit-reproducible.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .alignment import Domain, RoiFeature, TripletConfig, total_triplet_loss
from .evaluation import (
    DEFAULT_IOU_THRESHOLDS,
    Detection,
    GroundTruth,
    evaluate_detections,
    mean_ap,
)
from .geometry import (
    Box3D,
    PointCloud,
    iou_3d,
    iou_matrix,
    local_to_ego,
    nms,
    points_in_box,
)
from .proposals import IEConfig, Origin, Proposal, augment_proposals
from .refinery import (
    HighConfDatabase,
    Provenance,
    PseudoLabel,
    ThresholdMargin,
    refine_labels,
)

CATEGORY_SIZE_PRIORS = {
    "Car": (4.2, 1.9, 1.6),
    "Pedestrian": (0.8, 0.7, 1.75),
    "Cyclist": (1.8, 0.7, 1.7),
}

# Tags for deriving independent, reproducible random streams per purpose.
_STREAM_SOURCE_SCENE = 1
_STREAM_TARGET_SCENE = 2
_STREAM_LABELS = 3
_STREAM_REFINE = 4
_STREAM_PROPOSALS = 5
_STREAM_RESCORE = 6
_STREAM_FEATURES = 7
_STREAM_FEATURE_SPACE = 8


class CapacityError(RuntimeError):
    """Scene generation could not place an instance within the retry budget."""


def stream(seed: int, *tags: int) -> np.random.Generator:
    """A generator whose draws depend only on the seed and the tag tuple."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *tags])))


@dataclass(frozen=True)
class SceneConfig:
    """One domain's synthetic scene recipe.

    ``points_per_instance`` maps category to a (mean, sigma) normal from which
    each instance's point count is drawn; low-beam domains get low means.
    """

    instances_per_frame: dict[str, int] = field(
        default_factory=lambda: {"Car": 3, "Pedestrian": 2, "Cyclist": 1}
    )
    points_per_instance: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {
            "Car": (400.0, 60.0),
            "Pedestrian": (160.0, 25.0),
            "Cyclist": (200.0, 30.0),
        }
    )
    extent: float = 56.0
    clutter_density: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.extent <= 0.0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        for cat, n in self.instances_per_frame.items():
            if n < 0:
                raise ValueError(f"negative instance count for {cat}")
        for cat, (mean, sigma) in self.points_per_instance.items():
            if mean < 0 or sigma < 0:
                raise ValueError(f"invalid point-count distribution for {cat}")


def default_target_scene(**overrides) -> SceneConfig:
    """Target-domain default: roughly quarter of the source point counts."""
    base = dict(
        points_per_instance={
            "Car": (90.0, 20.0),
            "Pedestrian": (35.0, 8.0),
            "Cyclist": (45.0, 10.0),
        }
    )
    base.update(overrides)
    return SceneConfig(**base)


@dataclass(frozen=True)
class OracleConfig:
    """Noise model of the stand-in detector."""

    center_sigma: float = 0.2
    size_sigma: float = 0.05
    heading_sigma: float = 0.08
    confidence_sigma: float = 0.08
    false_positive_rate: float = 0.4
    miss_rate: float = 0.05
    bias_coeff: float = 0.6
    bias_radius: float = 4.0

    def __post_init__(self):
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError(f"miss rate must be in [0, 1], got {self.miss_rate}")
        if self.false_positive_rate < 0.0:
            raise ValueError("false-positive rate must be non-negative")

    def attenuated(self, scale: float) -> "OracleConfig":
        """All error parameters multiplied by ``scale`` (a better detector)."""
        return dataclasses.replace(
            self,
            center_sigma=self.center_sigma * scale,
            size_sigma=self.size_sigma * scale,
            heading_sigma=self.heading_sigma * scale,
            confidence_sigma=self.confidence_sigma * scale,
            false_positive_rate=self.false_positive_rate * scale,
            miss_rate=self.miss_rate * scale,
            bias_coeff=self.bias_coeff * scale,
        )


@dataclass(frozen=True)
class FeatureConfig:
    """Synthetic RoI feature space; target means start entangled."""

    dim: int = 32
    separation: float = 6.0
    noise_sigma: float = 0.6
    entanglement: float = 0.8
    domain_shift: float = 1.5
    max_per_category: int = 8
    align_lr: float = 0.15


@dataclass(frozen=True)
class Toggles:
    ca: bool = True
    ie: bool = True
    alignment: bool = True


@dataclass(frozen=True)
class SelfTrainConfig:
    epochs: int = 30
    label_update_period: int = 2
    frames: int = 200
    seed: int = 0
    margin: ThresholdMargin = field(default_factory=lambda: ThresholdMargin(0.25, 0.6))
    ie: IEConfig = field(default_factory=IEConfig)
    triplet: TripletConfig = field(default_factory=TripletConfig)
    toggles: Toggles = field(default_factory=Toggles)
    source_scene: SceneConfig = field(default_factory=SceneConfig)
    target_scene: SceneConfig = field(default_factory=default_target_scene)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    final_nms_threshold: float = 0.1
    proposals_per_instance: int = 4
    attenuation_gain: float = 0.1
    confusion_weight: float = 0.45

    def __post_init__(self):
        if self.label_update_period < 1:
            raise ValueError("label update period must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


# ---------------------------------------------------------------------------
# Scene generation
# ---------------------------------------------------------------------------

def generate_scene(
    cfg: SceneConfig, rng: np.random.Generator
) -> tuple[PointCloud, list[Box3D]]:
    """One synthetic frame: disjoint ground-truth boxes plus ground clutter.

    Boxes sit on the ground plane with category-typical sizes (5% jitter) and
    uniform headings; each instance gets its configured number of interior
    points; clutter points that would fall inside a box are dropped, so the
    per-instance point counts are exact.
    """
    boxes: list[Box3D] = []
    half = cfg.extent / 2.0
    for cat in sorted(cfg.instances_per_frame):
        prior = CATEGORY_SIZE_PRIORS.get(cat, (2.0, 1.0, 1.5))
        for _ in range(cfg.instances_per_frame[cat]):
            placed = False
            for _attempt in range(100):
                size = tuple(
                    p * (1.0 + rng.uniform(-0.05, 0.05)) for p in prior
                )
                heading = rng.uniform(-math.pi, math.pi)
                pad = 0.5 * math.hypot(size[0], size[1])
                cx = rng.uniform(-half + pad, half - pad)
                cy = rng.uniform(-half + pad, half - pad)
                box = Box3D((cx, cy, size[2] / 2.0), size, heading, cat)
                if all(iou_3d(box, other) == 0.0 for other in boxes):
                    boxes.append(box)
                    placed = True
                    break
            if not placed:
                raise CapacityError(
                    f"could not place {cat} instance in extent {cfg.extent}"
                )

    chunks: list[np.ndarray] = []
    for box in boxes:
        mean, sigma = cfg.points_per_instance.get(box.category, (50.0, 0.0))
        n = max(0, int(round(rng.normal(mean, sigma)))) if sigma > 0 else int(round(mean))
        if n == 0:
            continue
        local = rng.uniform(-0.48, 0.48, size=(n, 3)) * np.asarray(box.size)
        ego = local_to_ego(local, box)
        intensity = rng.uniform(0.0, 1.0, size=(n, 1))
        chunks.append(np.concatenate([ego, intensity], axis=1))

    n_clutter = int(round(cfg.clutter_density * cfg.extent * cfg.extent))
    if n_clutter:
        xy = rng.uniform(-half, half, size=(n_clutter, 2))
        z = rng.uniform(0.0, 0.06, size=(n_clutter, 1))
        intensity = rng.uniform(0.0, 1.0, size=(n_clutter, 1))
        clutter = np.concatenate([xy, z, intensity], axis=1)
        if boxes:
            cloud = PointCloud(clutter)
            keep = np.ones(n_clutter, dtype=bool)
            for box in boxes:
                keep[points_in_box(cloud, box)] = False
            clutter = clutter[keep]
        chunks.append(clutter)

    points = np.concatenate(chunks, axis=0) if chunks else np.empty((0, 4))
    return PointCloud(points), boxes


def density_offsets(
    cloud: PointCloud, gts: list[Box3D], radius: float
) -> np.ndarray:
    """Per-box offset from box center to the local point centroid (BEV).

    The offset approximates the local point-density gradient direction; the
    oracle scales it by its bias coefficient to drift proposal centers toward
    point-rich regions. Shape (len(gts), 3) with zero z components.
    """
    out = np.zeros((len(gts), 3))
    if cloud.count == 0:
        return out
    xy = cloud.xyz[:, :2]
    for k, box in enumerate(gts):
        center = np.asarray(box.center[:2])
        d2 = np.sum((xy - center) ** 2, axis=1)
        near = d2 <= radius * radius
        if near.any():
            com = xy[near].mean(axis=0)
            out[k, :2] = com - center
    return out


# ---------------------------------------------------------------------------
# Oracle detector
# ---------------------------------------------------------------------------

def oracle_detector(
    cloud: PointCloud,
    gts: list[Box3D],
    cfg: OracleConfig,
    rng: np.random.Generator,
    count: int = 1,
    bias_offsets: np.ndarray | None = None,
) -> list[Proposal]:
    """Perturbed proposals for each ground truth plus Poisson false positives.

    Each ground truth yields up to ``count`` proposals (each emitted with
    probability 1 - miss_rate); centers drift by bias_coeff times the local
    density offset, and the reported confidence is the true 3D IoU with the
    source ground truth plus clamped Gaussian noise.
    """
    if bias_offsets is None:
        bias_offsets = density_offsets(cloud, gts, cfg.bias_radius)
    boxes: list[Box3D] = []
    owners: list[int] = []
    for g_idx, gt in enumerate(gts):
        bias = cfg.bias_coeff * bias_offsets[g_idx]
        for _ in range(max(1, count)):
            if rng.random() < cfg.miss_rate:
                continue
            center = np.asarray(gt.center) + bias + rng.normal(0.0, cfg.center_sigma, 3)
            size = np.maximum(
                np.asarray(gt.size) * (1.0 + rng.normal(0.0, cfg.size_sigma, 3)), 0.05
            )
            heading = gt.heading + rng.normal(0.0, cfg.heading_sigma)
            boxes.append(Box3D(tuple(center), tuple(size), heading, gt.category))
            owners.append(g_idx)

    proposals: list[Proposal] = []
    if boxes:
        ious = iou_matrix(boxes, gts, "3d")
        noise = rng.normal(0.0, cfg.confidence_sigma, len(boxes))
        for k, box in enumerate(boxes):
            conf = float(np.clip(ious[k, owners[k]] + noise[k], 0.0, 1.0))
            proposals.append(Proposal(box, conf, Origin.BASIC))

    n_fp = int(rng.poisson(cfg.false_positive_rate))
    if n_fp:
        cats = sorted({g.category for g in gts}) or list(CATEGORY_SIZE_PRIORS)
        if cloud.count:
            lo = cloud.xyz[:, :2].min(axis=0)
            hi = cloud.xyz[:, :2].max(axis=0)
        else:
            lo, hi = np.array([-20.0, -20.0]), np.array([20.0, 20.0])
        for _ in range(n_fp):
            cat = cats[int(rng.integers(len(cats)))]
            prior = CATEGORY_SIZE_PRIORS.get(cat, (2.0, 1.0, 1.5))
            size = tuple(p * (1.0 + rng.uniform(-0.1, 0.1)) for p in prior)
            cx = rng.uniform(lo[0], hi[0])
            cy = rng.uniform(lo[1], hi[1])
            heading = rng.uniform(-math.pi, math.pi)
            box = Box3D((cx, cy, size[2] / 2.0), size, heading, cat)
            conf = float(rng.uniform(0.02, 0.3))
            proposals.append(Proposal(box, conf, Origin.BASIC))
    return proposals


def pseudo_labels(
    cloud: PointCloud,
    gts: list[Box3D],
    cfg: OracleConfig,
    rng: np.random.Generator,
    bias_offsets: np.ndarray | None = None,
) -> list[PseudoLabel]:
    """Basic pseudo labels: one oracle pass, one proposal per ground truth."""
    props = oracle_detector(cloud, gts, cfg, rng, count=1, bias_offsets=bias_offsets)
    return [PseudoLabel(p.box, p.confidence, Provenance.DETECTOR) for p in props]


def rescore(
    proposal: Proposal,
    gts: list[Box3D],
    cfg: OracleConfig,
    rng: np.random.Generator,
) -> float:
    """Second-stage stand-in: max true IoU against the ground truths plus noise."""
    best = float(iou_matrix([proposal.box], gts, "3d").max()) if gts else 0.0
    return float(np.clip(best + rng.normal(0.0, cfg.confidence_sigma), 0.0, 1.0))


def _rescore_all(
    props: list[Proposal],
    gts: list[Box3D],
    cfg: OracleConfig,
    rng: np.random.Generator,
    true_iou: np.ndarray | None = None,
) -> np.ndarray:
    """Batched rescore; draw-for-draw identical to calling rescore in order.

    ``true_iou`` may carry a precomputed (len(props), len(gts)) IoU matrix.
    """
    if not props:
        return np.empty(0)
    if gts:
        if true_iou is None:
            true_iou = iou_matrix([p.box for p in props], gts, "3d")
        best = true_iou.max(axis=1)
    else:
        best = np.zeros(len(props))
    noise = rng.normal(0.0, cfg.confidence_sigma, len(props))
    return np.clip(best + noise, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Synthetic RoI feature space
# ---------------------------------------------------------------------------

class FeatureSpace:
    """Per-(domain, category) Gaussian feature model.

    Source category means are well separated; target means start collapsed
    toward their common centroid plus a domain shift (the confusion the
    alignment loss is meant to undo). ``align_step`` moves target means toward
    the same-category source means.
    """

    def __init__(self, cfg: FeatureConfig, categories: list[str], seed: int):
        self.cfg = cfg
        self.categories = list(categories)
        rng = stream(seed, _STREAM_FEATURE_SPACE)
        self.source_means: dict[str, np.ndarray] = {}
        for cat in self.categories:
            v = rng.normal(0.0, 1.0, cfg.dim)
            self.source_means[cat] = cfg.separation * v / np.linalg.norm(v)
        shift = rng.normal(0.0, 1.0, cfg.dim)
        shift = cfg.domain_shift * shift / np.linalg.norm(shift)
        centroid = np.mean(list(self.source_means.values()), axis=0)
        self.target_means = {
            cat: (1.0 - cfg.entanglement) * self.source_means[cat]
            + cfg.entanglement * centroid
            + shift
            for cat in self.categories
        }
        self._source_sep = self._mean_separation(self.source_means)

    @staticmethod
    def _mean_separation(means: dict[str, np.ndarray]) -> float:
        cats = sorted(means)
        dists = [
            float(np.linalg.norm(means[a] - means[b]))
            for i, a in enumerate(cats)
            for b in cats[i + 1 :]
        ]
        return float(np.mean(dists)) if dists else 0.0

    def sample(
        self,
        source_counts: dict[str, int],
        target_counts: dict[str, int],
        rng: np.random.Generator,
    ) -> tuple[list[RoiFeature], list[RoiFeature]]:
        src, tgt = [], []
        for cat in self.categories:
            for _ in range(source_counts.get(cat, 0)):
                vec = self.source_means[cat] + rng.normal(
                    0.0, self.cfg.noise_sigma, self.cfg.dim
                )
                src.append(RoiFeature(vec, Domain.SOURCE, cat))
        for cat in self.categories:
            for _ in range(target_counts.get(cat, 0)):
                vec = self.target_means[cat] + rng.normal(
                    0.0, self.cfg.noise_sigma, self.cfg.dim
                )
                tgt.append(RoiFeature(vec, Domain.TARGET, cat))
        return src, tgt

    def align_step(self, triplet_total: float, n_anchors: int) -> None:
        per_anchor = triplet_total / max(1, n_anchors)
        step = min(0.5, self.cfg.align_lr * per_anchor)
        for cat in self.categories:
            self.target_means[cat] = self.target_means[cat] + step * (
                self.source_means[cat] - self.target_means[cat]
            )

    def confusion(self) -> float:
        """1 when target category means coincide, 0 when as separated as source."""
        if self._source_sep == 0.0:
            return 0.0
        ratio = self._mean_separation(self.target_means) / self._source_sep
        return float(np.clip(1.0 - ratio, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Supervision quality measurement
# ---------------------------------------------------------------------------

def label_quality(
    labels: list[PseudoLabel],
    gts: list[Box3D],
    thresholds: dict[str, float] = DEFAULT_IOU_THRESHOLDS,
) -> tuple[int, int, int, float]:
    """(matched labels, label count, gt count, summed best-IoU per label).

    Greedy category-aware one-to-one matching at per-category IoU thresholds,
    visiting labels in descending confidence order.
    """
    n_labels, n_gts = len(labels), len(gts)
    if n_labels == 0:
        return 0, 0, n_gts, 0.0
    iou_sum = 0.0
    tp = 0
    matched = [False] * n_gts
    order = np.argsort(-np.asarray([lb.confidence for lb in labels]), kind="stable")
    ious = iou_matrix([lb.box for lb in labels], gts, "3d") if n_gts else None
    for idx in order:
        lb = labels[int(idx)]
        same_cat = [
            g for g in range(n_gts) if gts[g].category == lb.box.category
        ]
        if not same_cat:
            continue
        row = ious[int(idx)]
        iou_sum += float(max(row[g] for g in same_cat))
        open_gts = [g for g in same_cat if not matched[g]]
        if not open_gts:
            continue
        best = max(open_gts, key=lambda g: row[g])
        if row[best] >= thresholds.get(lb.box.category, 0.5):
            matched[best] = True
            tp += 1
    return tp, n_labels, n_gts, iou_sum


# ---------------------------------------------------------------------------
# Self-training loop
# ---------------------------------------------------------------------------

METRICS_COLUMNS = (
    "epoch",
    "round",
    "precision",
    "recall",
    "mean_iou",
    "triplet_loss",
    "ap_3d",
    "ap_bev",
)


def self_train(cfg: SelfTrainConfig) -> list[dict]:
    """Run the select-then-train loop and return one metrics row per epoch.

    Per round (every ``label_update_period`` epochs): regenerate pseudo labels
    from the raw target clouds with the current oracle error scale, then apply
    complementary augmentation when enabled. Per epoch: run the proposal
    pipeline (oracle proposals, optional interpolation/extrapolation,
    rescoring, final NMS) on the training clouds, measure supervision and
    detection quality, and evaluate the triplet loss over synthetic RoI
    features. At each label update the oracle's error parameters are
    attenuated in proportion to the measured quality.
    """
    categories = sorted(cfg.target_scene.instances_per_frame)
    target = [
        generate_scene(cfg.target_scene, stream(cfg.seed, _STREAM_TARGET_SCENE, i))
        for i in range(cfg.frames)
    ]
    source = [
        generate_scene(cfg.source_scene, stream(cfg.seed, _STREAM_SOURCE_SCENE, i))
        for i in range(cfg.frames)
    ]
    source_counts = {
        cat: min(
            cfg.features.max_per_category,
            sum(1 for _, gts in source for g in gts if g.category == cat),
        )
        for cat in categories
    }
    raw_offsets = [
        density_offsets(cloud, gts, cfg.oracle.bias_radius) for cloud, gts in target
    ]

    feature_space = FeatureSpace(cfg.features, categories, cfg.seed)
    db = HighConfDatabase()
    error_scale = 1.0
    oracle_now = cfg.oracle
    supervising: list[list[PseudoLabel]] = [[] for _ in range(cfg.frames)]
    work_clouds: list[PointCloud] = [cloud for cloud, _ in target]
    work_offsets = list(raw_offsets)
    precision = recall = mean_iou = 0.0
    rows: list[dict] = []
    q_hist: list[float] = []
    round_idx = 0
    k = cfg.label_update_period

    for epoch in range(1, cfg.epochs + 1):
        if (epoch - 1) % k == 0:
            if q_hist:
                q_round = float(np.mean(q_hist[-k:]))
                error_scale = max(0.05, error_scale * (1.0 - cfg.attenuation_gain * q_round))
            oracle_now = cfg.oracle.attenuated(error_scale)
            round_idx += 1
            db.clear()
            for i, (cloud, gts) in enumerate(target):
                labels = pseudo_labels(
                    cloud,
                    gts,
                    oracle_now,
                    stream(cfg.seed, _STREAM_LABELS, round_idx, i),
                    bias_offsets=raw_offsets[i],
                )
                if cfg.toggles.ca:
                    work_clouds[i], supervising[i] = refine_labels(
                        cloud,
                        labels,
                        cfg.margin,
                        db,
                        stream(cfg.seed, _STREAM_REFINE, round_idx, i),
                    )
                else:
                    # Naive self-training keeps every box above the low
                    # threshold, unreliable ones included.
                    work_clouds[i] = cloud
                    supervising[i] = [
                        lb for lb in labels if lb.confidence > cfg.margin.t_neg
                    ]
                work_offsets[i] = density_offsets(
                    work_clouds[i], gts, cfg.oracle.bias_radius
                )
            # Supervision is fixed until the next label update, so its quality
            # is measured once per round.
            tp = labels_n = gts_n = 0
            iou_sum = 0.0
            for i, (_, gts) in enumerate(target):
                f_tp, f_labels, f_gts, f_iou = label_quality(supervising[i], gts)
                tp += f_tp
                labels_n += f_labels
                gts_n += f_gts
                iou_sum += f_iou
            precision = tp / labels_n if labels_n else 0.0
            recall = tp / gts_n if gts_n else 0.0
            mean_iou = iou_sum / labels_n if labels_n else 0.0

        all_dets: list[Detection] = []
        all_gts: list[GroundTruth] = []
        det_iou_sum = 0.0
        det_iou_n = 0
        det_counts = {cat: 0 for cat in categories}
        for i, (_, gts) in enumerate(target):
            props = oracle_detector(
                work_clouds[i],
                gts,
                oracle_now,
                stream(cfg.seed, _STREAM_PROPOSALS, epoch, i),
                count=cfg.proposals_per_instance,
                bias_offsets=work_offsets[i],
            )
            n_basic = len(props)
            if cfg.toggles.ie and props:
                props = augment_proposals(props, cfg.ie)
            dets_i: list[Detection] = []
            kept: list[int] = []
            true_iou = None
            if props:
                if gts:
                    true_iou = iou_matrix([p.box for p in props], gts, "3d")
                    if len(props) > n_basic:
                        # augmentation only ever appends, so the per-gt best
                        # proposal cannot get worse
                        assert (
                            true_iou.max(axis=0) >= true_iou[:n_basic].max(axis=0)
                        ).all()
                scores = _rescore_all(
                    props,
                    gts,
                    oracle_now,
                    stream(cfg.seed, _STREAM_RESCORE, epoch, i),
                    true_iou=true_iou,
                )
                kept = nms(
                    [p.box for p in props], scores, cfg.final_nms_threshold, "3d"
                )
                dets_i = [Detection(props[j].box, float(scores[j]), i) for j in kept]
            all_dets.extend(dets_i)
            all_gts.extend(GroundTruth(g, i) for g in gts)
            for d in dets_i:
                if d.box.category in det_counts:
                    det_counts[d.box.category] += 1
            if gts:
                if kept and true_iou is not None:
                    det_iou_sum += float(true_iou[kept].max(axis=0).sum())
                det_iou_n += len(gts)
        det_mean_iou = det_iou_sum / det_iou_n if det_iou_n else 0.0

        target_counts = {
            cat: min(cfg.features.max_per_category, det_counts[cat])
            for cat in categories
        }
        src_feats, tgt_feats = feature_space.sample(
            source_counts, target_counts, stream(cfg.seed, _STREAM_FEATURES, epoch)
        )
        l_intra, l_inter, l_total = total_triplet_loss(
            src_feats, tgt_feats, cfg.triplet.alpha
        )
        if cfg.toggles.alignment:
            feature_space.align_step(l_total, len(src_feats) + len(tgt_feats))
        confusion = feature_space.confusion()

        ap = evaluate_detections(all_dets, all_gts)
        ap_3d = mean_ap(ap, "ap_3d")
        ap_bev = mean_ap(ap, "ap_bev")

        q_geom = 0.35 * precision + 0.25 * mean_iou + 0.4 * det_mean_iou
        q = q_geom * (1.0 - cfg.confusion_weight * confusion)
        q_hist.append(q)

        rows.append(
            {
                "epoch": epoch,
                "round": round_idx,
                "precision": precision,
                "recall": recall,
                "mean_iou": mean_iou,
                "triplet_loss": l_total,
                "ap_3d": ap_3d,
                "ap_bev": ap_bev,
            }
        )
    return rows
