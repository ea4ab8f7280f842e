"""Command-line entry points.

Subcommands: gen, refine, propose, align, eval, selftrain. Every run writes a
manifest with the resolved configuration and seed next to its outputs;
re-running with --config pointed at the manifest reproduces the outputs.
"""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict
from pathlib import Path

from . import alignment, config, evaluation, fileio, harness
from .proposals import IEConfig, Proposal, augment_proposals
from .refinery import HighConfDatabase, PseudoLabel, ThresholdMargin, refine_labels


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> dict:
    if args.config:
        return config.load_config_file(args.config)
    return {}


def _frame_files(data_dir: Path) -> list[tuple[int, Path]]:
    points_dir = data_dir / "points"
    if not points_dir.is_dir():
        raise SystemExit(f"no points directory under {data_dir}")
    frames = sorted((int(p.stem), p) for p in points_dir.glob("*.bin"))
    if not frames:
        raise SystemExit(f"no .bin frames under {points_dir}")
    return frames


def cmd_gen(args) -> int:
    cfg_dict = _load_config(args)
    scene_section = cfg_dict.get("scene", {})
    if scene_section:
        scene = config.scene_config_from_dict(scene_section)
    elif args.domain == "target":
        scene = harness.default_target_scene()
    else:
        scene = harness.SceneConfig()
    if args.seed is not None:
        seed = args.seed
    else:
        seed = cfg_dict.get("seed", scene.seed)
    frames = args.frames if args.frames is not None else cfg_dict.get("frames", 10)

    out = _outdir(args)
    (out / "points").mkdir(exist_ok=True)
    records: list[fileio.LabelRecord] = []
    for i in range(frames):
        cloud, gts = harness.generate_scene(scene, harness.stream(seed, 0, i))
        fileio.store_point_cloud(out / "points" / f"{i:06d}.bin", cloud)
        records.extend(fileio.LabelRecord(i, box, 1.0) for box in gts)
    fileio.store_labels(out / "labels.txt", records)
    config.write_manifest(
        out / "manifest.yaml",
        "gen",
        {"scene": config.config_to_dict(scene), "frames": frames, "seed": seed},
        seed,
        ["points/", "labels.txt"],
    )
    _say(args, f"wrote {frames} frames, {len(records)} boxes to {out}")
    return 0


def cmd_refine(args) -> int:
    cfg_dict = _load_config(args)
    t_neg = args.t_neg if args.t_neg is not None else cfg_dict.get("t_neg", 0.25)
    t_pos = args.t_pos if args.t_pos is not None else cfg_dict.get("t_pos", 0.6)
    data = Path(args.data if args.data is not None else cfg_dict["data"])
    labels_path = Path(
        args.labels if args.labels is not None else cfg_dict.get("labels", data / "labels.txt")
    )
    seed = args.seed if args.seed is not None else cfg_dict.get("seed", 0)
    margin = ThresholdMargin(t_neg, t_pos)

    by_frame: dict[int, list[fileio.LabelRecord]] = defaultdict(list)
    for rec in fileio.load_labels(labels_path):
        by_frame[rec.frame_id].append(rec)

    out = _outdir(args)
    (out / "points").mkdir(exist_ok=True)
    db = HighConfDatabase()
    refined_records: list[fileio.LabelRecord] = []
    n_in = n_out = 0
    for frame_id, path in _frame_files(data):
        cloud = fileio.load_point_cloud(path)
        labels = [
            PseudoLabel(rec.box, min(1.0, max(0.0, rec.confidence)))
            for rec in by_frame.get(frame_id, [])
        ]
        new_cloud, supervising = refine_labels(
            cloud, labels, margin, db, harness.stream(seed, 1, frame_id)
        )
        fileio.store_point_cloud(out / "points" / f"{frame_id:06d}.bin", new_cloud)
        refined_records.extend(
            fileio.LabelRecord(frame_id, lb.box, lb.confidence) for lb in supervising
        )
        n_in += len(labels)
        n_out += len(supervising)
    fileio.store_labels(out / "labels.txt", refined_records)
    config.write_manifest(
        out / "manifest.yaml",
        "refine",
        {
            "data": str(data),
            "labels": str(labels_path),
            "t_neg": t_neg,
            "t_pos": t_pos,
            "seed": seed,
        },
        seed,
        ["points/", "labels.txt"],
    )
    _say(args, f"refined {n_in} labels into {n_out} supervising labels at {out}")
    return 0


def cmd_propose(args) -> int:
    cfg_dict = _load_config(args)
    labels_path = Path(args.labels if args.labels is not None else cfg_dict["labels"])
    t_iou = args.t_iou if args.t_iou is not None else cfg_dict.get("t_iou", 0.01)
    lam = args.lam if args.lam is not None else cfg_dict.get("lam", 0.5)
    ie = IEConfig(t_iou=t_iou, lam=lam)

    by_frame: dict[int, list[fileio.LabelRecord]] = defaultdict(list)
    for rec in fileio.load_labels(labels_path):
        by_frame[rec.frame_id].append(rec)

    out = _outdir(args)
    augmented: list[fileio.LabelRecord] = []
    n_generated = 0
    for frame_id in sorted(by_frame):
        props = [
            Proposal(rec.box, min(1.0, max(0.0, rec.confidence)))
            for rec in by_frame[frame_id]
        ]
        result = augment_proposals(props, ie)
        n_generated += len(result) - len(props)
        augmented.extend(
            fileio.LabelRecord(frame_id, p.box, p.confidence) for p in result
        )
    fileio.store_labels(out / "proposals.txt", augmented)
    config.write_manifest(
        out / "manifest.yaml",
        "propose",
        {"labels": str(labels_path), "t_iou": t_iou, "lam": lam},
        args.seed if args.seed is not None else 0,
        ["proposals.txt"],
    )
    _say(args, f"generated {n_generated} extra proposals ({len(augmented)} total)")
    return 0


def cmd_align(args) -> int:
    cfg_dict = _load_config(args)
    source_path = args.source if args.source is not None else cfg_dict["source"]
    target_path = args.target if args.target is not None else cfg_dict["target"]
    alpha = args.alpha if args.alpha is not None else cfg_dict.get("alpha", 1.0)
    eta = args.eta if args.eta is not None else cfg_dict.get("eta", 0.1)
    det_loss = args.det_loss if args.det_loss is not None else cfg_dict.get("det_loss", 0.0)

    source = alignment.load_features(source_path)
    target = alignment.load_features(target_path)
    l_intra, l_inter, l_total = alignment.total_triplet_loss(source, target, alpha)
    combined = alignment.combined_loss(
        det_loss, l_total, alignment.TripletConfig(alpha, eta)
    )

    out = _outdir(args)
    fileio.write_metrics_csv(
        out / "alignment_report.csv",
        [
            {
                "intra": l_intra,
                "inter": l_inter,
                "total": l_total,
                "alpha": alpha,
                "eta": eta,
                "det_loss": det_loss,
                "combined": combined,
            }
        ],
        ("intra", "inter", "total", "alpha", "eta", "det_loss", "combined"),
    )
    config.write_manifest(
        out / "manifest.yaml",
        "align",
        {
            "source": str(source_path),
            "target": str(target_path),
            "alpha": alpha,
            "eta": eta,
            "det_loss": det_loss,
        },
        args.seed if args.seed is not None else 0,
        ["alignment_report.csv"],
    )
    _say(
        args,
        f"triplet loss: intra={l_intra:.6f} inter={l_inter:.6f} "
        f"total={l_total:.6f} combined={combined:.6f}",
    )
    return 0


def cmd_eval(args) -> int:
    cfg_dict = _load_config(args)
    dets_path = args.dets if args.dets is not None else cfg_dict["dets"]
    gts_path = args.gts if args.gts is not None else cfg_dict["gts"]
    task = args.task if args.task is not None else cfg_dict.get("task", "eval")

    dets = [
        evaluation.Detection(rec.box, rec.confidence, rec.frame_id)
        for rec in fileio.load_labels(dets_path)
    ]
    gts = [
        evaluation.GroundTruth(rec.box, rec.frame_id)
        for rec in fileio.load_labels(gts_path)
    ]
    results = evaluation.evaluate_detections(dets, gts)

    gap_ref: dict[str, dict[str, float]] = {}
    gap_ref_path = args.gap_ref if args.gap_ref is not None else cfg_dict.get("gap_ref")
    if gap_ref_path:
        import csv as _csv

        with open(gap_ref_path, newline="") as fh:
            for row in _csv.DictReader(fh):
                gap_ref[row["category"]] = {
                    k: float(row[k])
                    for k in (
                        "source_ap_bev",
                        "source_ap_3d",
                        "oracle_ap_bev",
                        "oracle_ap_3d",
                    )
                }

    rows = []
    for cat, ap in results.items():
        row = {"task": task, "category": cat, "ap_bev": ap["ap_bev"], "ap_3d": ap["ap_3d"]}
        ref = gap_ref.get(cat)
        if ref:
            row["closed_gap_bev"] = evaluation.closed_gap(
                ap["ap_bev"], ref["source_ap_bev"], ref["oracle_ap_bev"]
            )
            row["closed_gap_3d"] = evaluation.closed_gap(
                ap["ap_3d"], ref["source_ap_3d"], ref["oracle_ap_3d"]
            )
        rows.append(row)

    out = _outdir(args)
    fileio.write_results_csv(out / "results.csv", rows)
    config.write_manifest(
        out / "manifest.yaml",
        "eval",
        {
            "dets": str(dets_path),
            "gts": str(gts_path),
            "task": task,
            "gap_ref": str(gap_ref_path) if gap_ref_path else None,
        },
        args.seed if args.seed is not None else 0,
        ["results.csv"],
    )
    for row in rows:
        _say(
            args,
            f"{row['category']}: AP_BEV={row['ap_bev']:.2f} AP_3D={row['ap_3d']:.2f}",
        )
    return 0


def cmd_selftrain(args) -> int:
    cfg_dict = _load_config(args)
    cfg = config.selftrain_config_from_dict(cfg_dict)
    if args.seed is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, seed=args.seed)

    rows = harness.self_train(cfg)
    out = _outdir(args)
    fileio.write_metrics_csv(out / "metrics.csv", rows, harness.METRICS_COLUMNS)
    config.write_manifest(out / "manifest.yaml", "selftrain", cfg, cfg.seed, ["metrics.csv"])
    final = rows[-1]
    _say(
        args,
        f"{cfg.epochs} epochs done: precision={final['precision']:.3f} "
        f"mean_iou={final['mean_iou']:.3f} ap_3d={final['ap_3d']:.2f}",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refinery3d",
        description="Pseudo-label refinement toolchain for LiDAR 3D detection.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the run seed")
    common.add_argument("--config", type=str, default=None, help="YAML config or manifest")
    common.add_argument("--out", type=str, default="out", help="output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--domain", choices=["source", "target"], default="source")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("refine", parents=[common], help="complementary augmentation")
    p.add_argument("--data", type=str, default=None, help="dataset directory")
    p.add_argument("--labels", type=str, default=None, help="pseudo-label file")
    p.add_argument("--t-neg", type=float, default=None, dest="t_neg")
    p.add_argument("--t-pos", type=float, default=None, dest="t_pos")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("propose", parents=[common], help="interpolate/extrapolate proposals")
    p.add_argument("--labels", type=str, default=None, help="proposals as label file")
    p.add_argument("--t-iou", type=float, default=None, dest="t_iou")
    p.add_argument("--lam", type=float, default=None)
    p.set_defaults(func=cmd_propose)

    p = sub.add_parser("align", parents=[common], help="triplet-loss report from feature CSVs")
    p.add_argument("--source", type=str, default=None)
    p.add_argument("--target", type=str, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--det-loss", type=float, default=None, dest="det_loss")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", parents=[common], help="AP and closed-gap evaluation")
    p.add_argument("--dets", type=str, default=None)
    p.add_argument("--gts", type=str, default=None)
    p.add_argument("--task", type=str, default=None)
    p.add_argument("--gap-ref", type=str, default=None, dest="gap_ref")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftrain", parents=[common], help="run the self-training benchmark")
    p.set_defaults(func=cmd_selftrain)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
