"""File formats: binary point clouds, text label files, metrics/results CSV.

Point clouds use the de-facto LiDAR binary layout: consecutive little-endian
float32 quadruples (x, y, z, intensity). Labels are line-delimited text with
one box per line; numeric fields round-trip at 17 significant digits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Box3D, PointCloud

POINT_RECORD_BYTES = 16

LABEL_FIELDS = (
    "frame_id",
    "category",
    "cx",
    "cy",
    "cz",
    "l",
    "w",
    "h",
    "heading",
    "confidence",
)


class FormatError(ValueError):
    """The file does not conform to the expected binary/text layout."""


class DataError(ValueError):
    """The file parses but contains invalid values."""


@dataclass(frozen=True)
class LabelRecord:
    """One labeled box bound to a frame, with a confidence/score column."""

    frame_id: int
    box: Box3D
    confidence: float


def load_point_cloud(path: str | Path) -> PointCloud:
    """Read little-endian float32 (x, y, z, intensity) records."""
    raw = Path(path).read_bytes()
    if len(raw) % POINT_RECORD_BYTES != 0:
        raise FormatError(
            f"{path}: size {len(raw)} not divisible by {POINT_RECORD_BYTES}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    if data.size and not np.isfinite(data).all():
        raise DataError(f"{path}: non-finite point values")
    return PointCloud(data.astype(np.float64))


def store_point_cloud(path: str | Path, cloud: PointCloud) -> None:
    """Write the cloud in the same float32 binary layout."""
    Path(path).write_bytes(cloud.points.astype("<f4").tobytes())


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def store_labels(path: str | Path, labels: list[LabelRecord]) -> None:
    """One whitespace-separated record per line, in LABEL_FIELDS order."""
    lines = []
    for rec in labels:
        cx, cy, cz = rec.box.center
        l, w, h = rec.box.size
        lines.append(
            " ".join(
                [
                    str(int(rec.frame_id)),
                    rec.box.category,
                    _fmt(cx),
                    _fmt(cy),
                    _fmt(cz),
                    _fmt(l),
                    _fmt(w),
                    _fmt(h),
                    _fmt(rec.box.heading),
                    _fmt(rec.confidence),
                ]
            )
        )
    Path(path).write_text("".join(line + "\n" for line in lines))


def load_labels(path: str | Path) -> list[LabelRecord]:
    out: list[LabelRecord] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != len(LABEL_FIELDS):
            raise FormatError(
                f"{path}:{lineno}: expected {len(LABEL_FIELDS)} fields, got {len(parts)}"
            )
        try:
            frame_id = int(parts[0])
            nums = [float(v) for v in parts[2:]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        box = Box3D(
            (nums[0], nums[1], nums[2]), (nums[3], nums[4], nums[5]), nums[6], parts[1]
        )
        out.append(LabelRecord(frame_id, box, nums[7]))
    return out


def write_metrics_csv(path: str | Path, rows: list[dict], columns: tuple[str, ...]) -> None:
    """Fixed-column CSV with deterministic float formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            out = []
            for col in columns:
                v = row[col]
                out.append(str(v) if isinstance(v, int) else _fmt(v))
            writer.writerow(out)


def write_results_csv(path: str | Path, rows: list[dict]) -> None:
    """Evaluation output: task, category, AP columns, closed-gap columns."""
    columns = ("task", "category", "ap_bev", "ap_3d", "closed_gap_bev", "closed_gap_3d")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            out = []
            for col in columns:
                v = row.get(col)
                if v is None:
                    out.append("")
                elif isinstance(v, str):
                    out.append(v)
                else:
                    out.append(_fmt(v))
            writer.writerow(out)
