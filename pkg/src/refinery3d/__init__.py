"""Pseudo-label refinement toolkit for LiDAR 3D detection.

Building blocks: exact oriented-box geometry (rotated IoU, NMS, containment),
complementary augmentation of unreliable pseudo boxes, proposal
interpolation/extrapolation, cross-domain triplet-loss feature alignment,
KITTI-style AP@R40 evaluation, and a deterministic desk-scale self-training
harness with a noisy oracle detector.
"""

from .alignment import (
    Domain,
    RoiFeature,
    TripletConfig,
    combined_loss,
    hardest_negative,
    hardest_positive,
    load_features,
    save_features,
    total_triplet_loss,
    triplet_loss_pair,
)
from .evaluation import (
    Detection,
    GroundTruth,
    UndefinedMetricError,
    average_precision_r40,
    closed_gap,
    evaluate_detections,
    match_detections,
)
from .geometry import (
    Box3D,
    DegenerateBoxError,
    PointCloud,
    ego_to_local,
    iou_3d,
    iou_bev,
    iou_matrix,
    local_to_ego,
    local_to_ego_scaled,
    nms,
    points_in_box,
    rotation_matrix,
)
from .harness import (
    CapacityError,
    FeatureConfig,
    OracleConfig,
    SceneConfig,
    SelfTrainConfig,
    Toggles,
    generate_scene,
    oracle_detector,
    rescore,
    self_train,
)
from .proposals import (
    IEConfig,
    Origin,
    Proposal,
    augment_proposals,
    closest_proposal,
    extrapolate,
    interpolate,
    select_highest_confidence,
)
from .refinery import (
    BoxClass,
    HighConfDatabase,
    Provenance,
    PseudoLabel,
    ThresholdMargin,
    box_replace,
    classify_pseudo_box,
    point_remove,
    refine_labels,
    replace_probability,
)

__version__ = "0.1.0"
