"""Oriented 3D box geometry: rotations, frame transforms, containment, IoU, NMS.

Boxes are upright (rotated about the z axis only). All functions are pure and
operate on float64 arrays; batch helpers exist for the hot paths (pairwise IoU
matrices and greedy NMS) so that per-frame pipelines stay fast without any
compiled extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _HAVE_NUMBA = False

CAR = "Car"
PEDESTRIAN = "Pedestrian"
CYCLIST = "Cyclist"
DEFAULT_CATEGORIES = (CAR, PEDESTRIAN, CYCLIST)

# BEV intersection slivers below this area (m^2) count as empty.
SLIVER_AREA = 1e-12


class DegenerateBoxError(ValueError):
    """A box size component is zero or negative where positive is required."""


def normalize_heading(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    if not math.isfinite(theta):
        raise ValueError(f"heading must be finite, got {theta!r}")
    m = math.fmod(theta + math.pi, 2.0 * math.pi)
    if m <= 0.0:
        m += 2.0 * math.pi
    return m - math.pi


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box: center (m), size (l, w, h) (m), heading (rad), category.

    The heading is normalized to (-pi, pi] on construction; sizes must be
    strictly positive. Length runs along the box-local x axis, width along y,
    height along z.
    """

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    heading: float
    category: str = CAR

    def __post_init__(self):
        cx, cy, cz = (float(v) for v in self.center)
        l, w, h = (float(v) for v in self.size)
        if not all(math.isfinite(v) for v in (cx, cy, cz, l, w, h)):
            raise ValueError("box center/size must be finite")
        if l <= 0.0 or w <= 0.0 or h <= 0.0:
            raise DegenerateBoxError(f"box size must be positive, got {(l, w, h)}")
        object.__setattr__(self, "center", (cx, cy, cz))
        object.__setattr__(self, "size", (l, w, h))
        object.__setattr__(self, "heading", normalize_heading(float(self.heading)))

    @property
    def volume(self) -> float:
        l, w, h = self.size
        return l * w * h

    def as_array(self) -> np.ndarray:
        """Return [cx, cy, cz, l, w, h, heading] as float64."""
        return np.array([*self.center, *self.size, self.heading], dtype=np.float64)


@dataclass(frozen=True)
class PointCloud:
    """Flat (N, 4) float64 array of (x, y, z, intensity) records."""

    points: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError(f"point cloud must have shape (N, 4), got {pts.shape}")
        if pts.size and not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite values")
        object.__setattr__(self, "points", pts)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.empty((0, 4)))

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.count

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, 3]


def rotation_matrix(theta: float) -> np.ndarray:
    """3x3 z-rotation with rows [cos, -sin, 0], [sin, cos, 0], [0, 0, 1]."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta!r}")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def ego_to_local(p, box: Box3D) -> np.ndarray:
    """Map ego-frame point(s) into the box-local frame.

    The translated row vector (p - center) is right-multiplied by the box's
    rotation matrix. Accepts a single (3,) point or an (N, 3) batch.
    """
    p = np.asarray(p, dtype=np.float64)
    return (p - np.asarray(box.center)) @ rotation_matrix(box.heading)


def local_to_ego_scaled(p_local, src_size: Sequence[float], dst: Box3D) -> np.ndarray:
    """Scale box-local point(s) from a donor box's extents onto ``dst`` and
    map them back into the ego frame.

    Each local coordinate is scaled by dst_size/src_size per axis, then the
    row vector is right-multiplied by the transpose of dst's rotation matrix
    and translated to dst's center.
    """
    l_h, w_h, h_h = (float(v) for v in src_size)
    if l_h <= 0.0 or w_h <= 0.0 or h_h <= 0.0:
        raise DegenerateBoxError(f"source size must be positive, got {(l_h, w_h, h_h)}")
    p_local = np.asarray(p_local, dtype=np.float64)
    l_b, w_b, h_b = dst.size
    scaled = p_local * np.array([l_b / l_h, w_b / w_h, h_b / h_h])
    return scaled @ rotation_matrix(dst.heading).T + np.asarray(dst.center)


def local_to_ego(p_local, box: Box3D) -> np.ndarray:
    """Map box-local point(s) into the ego frame (scale ratio 1)."""
    return local_to_ego_scaled(p_local, box.size, box)


def points_in_box(cloud: PointCloud, box: Box3D) -> np.ndarray:
    """Indices of cloud points inside the box (closed boundaries)."""
    if cloud.count == 0:
        return np.empty(0, dtype=np.int64)
    local = ego_to_local(cloud.xyz, box)
    half = np.asarray(box.size) * 0.5
    mask = (np.abs(local) <= half).all(axis=1)
    return np.nonzero(mask)[0]


# ---------------------------------------------------------------------------
# Batched rotated-rectangle intersection (Sutherland-Hodgman clipping)
# ---------------------------------------------------------------------------

def boxes_to_array(boxes: Iterable[Box3D]) -> np.ndarray:
    """Stack boxes into an (N, 7) array [cx, cy, cz, l, w, h, heading]."""
    arr = [b.as_array() for b in boxes]
    if not arr:
        return np.empty((0, 7))
    return np.stack(arr)


def bev_corners(boxes: np.ndarray) -> np.ndarray:
    """(N, 4, 2) BEV footprint corners in counter-clockwise order."""
    boxes = np.asarray(boxes, dtype=np.float64)
    half_l = boxes[:, 3] * 0.5
    half_w = boxes[:, 4] * 0.5
    # CCW in the local frame: (+,+), (-,+), (-,-), (+,-)
    sx = np.array([1.0, -1.0, -1.0, 1.0])
    sy = np.array([1.0, 1.0, -1.0, -1.0])
    local = np.stack([half_l[:, None] * sx, half_w[:, None] * sy], axis=2)
    c, s = np.cos(boxes[:, 6]), np.sin(boxes[:, 6])
    x = local[..., 0] * c[:, None] - local[..., 1] * s[:, None]
    y = local[..., 0] * s[:, None] + local[..., 1] * c[:, None]
    return np.stack([x, y], axis=2) + boxes[:, None, :2]


_BUF = 10  # clipping a convex quad by 4 half-planes yields at most 8 vertices


def _clip_areas(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Intersection areas of paired convex CCW quads, vectorized over pairs."""
    n = subject.shape[0]
    if n == 0:
        return np.empty(0)
    verts = np.zeros((n, _BUF, 2))
    verts[:, :4] = subject
    counts = np.full(n, 4, dtype=np.int64)
    slots = np.arange(_BUF)

    for k in range(4):
        b1 = clip[:, k]
        b2 = clip[:, (k + 1) % 4]
        e = b2 - b1
        d = e[:, None, 0] * (verts[:, :, 1] - b1[:, None, 1]) - e[:, None, 1] * (
            verts[:, :, 0] - b1[:, None, 0]
        )
        valid = slots[None, :] < counts[:, None]
        inside = d >= 0.0

        nxt = slots[None, :] + 1
        nxt = np.where(nxt < counts[:, None], nxt, 0)
        d_next = np.take_along_axis(d, nxt, axis=1)
        v_next = np.take_along_axis(verts, nxt[:, :, None], axis=1)
        inside_next = d_next >= 0.0

        crossing = (inside != inside_next) & valid
        denom = d - d_next
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(denom != 0.0, d / denom, 0.0)
        cross_pts = verts + t[:, :, None] * (v_next - verts)

        # Interleave per-slot emissions: the slot's own vertex, then the
        # crossing point, so output order follows the polygon boundary.
        flags = np.zeros((n, 2 * _BUF), dtype=bool)
        flags[:, 0::2] = inside & valid
        flags[:, 1::2] = crossing
        pts = np.zeros((n, 2 * _BUF, 2))
        pts[:, 0::2] = verts
        pts[:, 1::2] = cross_pts

        counts = flags.sum(axis=1)
        pos = np.cumsum(flags, axis=1) - 1
        rows, cols = np.nonzero(flags)
        verts = np.zeros((n, _BUF, 2))
        verts[rows, pos[rows, cols]] = pts[rows, cols]

    # Shoelace with slots beyond each count pinned to the first vertex, so the
    # padded path closes on itself and contributes zero extra area.
    gather = np.where(slots[None, :] < counts[:, None], slots[None, :], 0)
    poly = np.take_along_axis(verts, gather[:, :, None], axis=1)
    nxt = np.roll(poly, -1, axis=1)
    area = 0.5 * np.abs(
        np.sum(poly[:, :, 0] * nxt[:, :, 1] - nxt[:, :, 0] * poly[:, :, 1], axis=1)
    )
    area[area < SLIVER_AREA] = 0.0
    return area


def _pairwise_iou_numpy(a: np.ndarray, b: np.ndarray, kind: str) -> np.ndarray:
    na, nb = a.shape[0], b.shape[0]
    out = np.zeros((na, nb))

    # Circumscribed-circle rejection in BEV kills the all-pairs cost.
    ra = 0.5 * np.hypot(a[:, 3], a[:, 4])
    rb = 0.5 * np.hypot(b[:, 3], b[:, 4])
    d2 = (a[:, None, 0] - b[None, :, 0]) ** 2 + (a[:, None, 1] - b[None, :, 1]) ** 2
    cand = d2 <= (ra[:, None] + rb[None, :]) ** 2

    if kind == "3d":
        lo = np.maximum(
            a[:, None, 2] - 0.5 * a[:, None, 5], b[None, :, 2] - 0.5 * b[None, :, 5]
        )
        hi = np.minimum(
            a[:, None, 2] + 0.5 * a[:, None, 5], b[None, :, 2] + 0.5 * b[None, :, 5]
        )
        z_overlap = np.maximum(hi - lo, 0.0)
        cand &= z_overlap > 0.0

    ii, jj = np.nonzero(cand)
    if ii.size == 0:
        return out
    inter_area = _clip_areas(bev_corners(a[ii]), bev_corners(b[jj]))

    if kind == "bev":
        area_a = a[ii, 3] * a[ii, 4]
        area_b = b[jj, 3] * b[jj, 4]
        union = area_a + area_b - inter_area
        vals = np.where(union > 0.0, inter_area / union, 0.0)
    else:
        inter_vol = inter_area * z_overlap[ii, jj]
        vol_a = a[ii, 3] * a[ii, 4] * a[ii, 5]
        vol_b = b[jj, 3] * b[jj, 4] * b[jj, 5]
        union = vol_a + vol_b - inter_vol
        vals = np.where(union > 0.0, inter_vol / union, 0.0)
    out[ii, jj] = vals
    return out


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _corners_jit(boxes):  # pragma: no cover - exercised via wrapper
        n = boxes.shape[0]
        out = np.empty((n, 4, 2))
        sx = (1.0, -1.0, -1.0, 1.0)
        sy = (1.0, 1.0, -1.0, -1.0)
        for i in range(n):
            c = math.cos(boxes[i, 6])
            s = math.sin(boxes[i, 6])
            for v in range(4):
                lx = 0.5 * boxes[i, 3] * sx[v]
                ly = 0.5 * boxes[i, 4] * sy[v]
                out[i, v, 0] = lx * c - ly * s + boxes[i, 0]
                out[i, v, 1] = lx * s + ly * c + boxes[i, 1]
        return out

    @numba.njit(cache=True)
    def _iou_matrix_jit(a, b, three_d):  # pragma: no cover - via wrapper
        na, nb = a.shape[0], b.shape[0]
        out = np.zeros((na, nb))
        ca = _corners_jit(a)
        cb = _corners_jit(b)
        poly = np.empty((10, 2))
        tmp = np.empty((10, 2))
        for i in range(na):
            r_a = 0.5 * math.hypot(a[i, 3], a[i, 4])
            area_a = a[i, 3] * a[i, 4]
            for j in range(nb):
                dx = a[i, 0] - b[j, 0]
                dy = a[i, 1] - b[j, 1]
                rr = r_a + 0.5 * math.hypot(b[j, 3], b[j, 4])
                if dx * dx + dy * dy > rr * rr:
                    continue
                z_overlap = 0.0
                if three_d:
                    lo = max(a[i, 2] - 0.5 * a[i, 5], b[j, 2] - 0.5 * b[j, 5])
                    hi = min(a[i, 2] + 0.5 * a[i, 5], b[j, 2] + 0.5 * b[j, 5])
                    z_overlap = hi - lo
                    if z_overlap <= 0.0:
                        continue
                cnt = 4
                for v in range(4):
                    poly[v, 0] = ca[i, v, 0]
                    poly[v, 1] = ca[i, v, 1]
                for k in range(4):
                    k2 = k + 1 if k < 3 else 0
                    b1x = cb[j, k, 0]
                    b1y = cb[j, k, 1]
                    ex = cb[j, k2, 0] - b1x
                    ey = cb[j, k2, 1] - b1y
                    m = 0
                    for v in range(cnt):
                        vn = v + 1 if v + 1 < cnt else 0
                        cx = poly[v, 0]
                        cy = poly[v, 1]
                        nx = poly[vn, 0]
                        ny = poly[vn, 1]
                        dc = ex * (cy - b1y) - ey * (cx - b1x)
                        dn = ex * (ny - b1y) - ey * (nx - b1x)
                        inside_c = dc >= 0.0
                        inside_n = dn >= 0.0
                        if inside_c:
                            tmp[m, 0] = cx
                            tmp[m, 1] = cy
                            m += 1
                        if inside_c != inside_n:
                            denom = dc - dn
                            t = dc / denom if denom != 0.0 else 0.0
                            tmp[m, 0] = cx + t * (nx - cx)
                            tmp[m, 1] = cy + t * (ny - cy)
                            m += 1
                    cnt = m
                    for v in range(m):
                        poly[v, 0] = tmp[v, 0]
                        poly[v, 1] = tmp[v, 1]
                    if cnt == 0:
                        break
                if cnt < 3:
                    continue
                acc = 0.0
                for v in range(cnt):
                    vn = v + 1 if v + 1 < cnt else 0
                    acc += poly[v, 0] * poly[vn, 1] - poly[vn, 0] * poly[v, 1]
                inter_area = 0.5 * abs(acc)
                if inter_area < SLIVER_AREA:
                    continue
                if three_d:
                    inter = inter_area * z_overlap
                    union = area_a * a[i, 5] + b[j, 3] * b[j, 4] * b[j, 5] - inter
                else:
                    inter = inter_area
                    union = area_a + b[j, 3] * b[j, 4] - inter
                if union > 0.0:
                    out[i, j] = inter / union
        return out


def _pairwise_iou(a: np.ndarray, b: np.ndarray, kind: str) -> np.ndarray:
    """(Na, Nb) IoU matrix over (N, 7) box arrays; kind is '3d' or 'bev'."""
    if kind not in ("3d", "bev"):
        raise ValueError(f"iou kind must be '3d' or 'bev', got {kind!r}")
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    if _HAVE_NUMBA:
        return _iou_matrix_jit(a, b, kind == "3d")
    return _pairwise_iou_numpy(a, b, kind)


def iou_matrix(boxes_a, boxes_b, kind: str = "3d") -> np.ndarray:
    """Pairwise IoU between two box collections (Box3D sequences or arrays)."""
    a = boxes_a if isinstance(boxes_a, np.ndarray) else boxes_to_array(boxes_a)
    b = boxes_b if isinstance(boxes_b, np.ndarray) else boxes_to_array(boxes_b)
    return _pairwise_iou(a, b, kind)


def iou_3d(a: Box3D, b: Box3D) -> float:
    """3D IoU of two upright boxes: BEV polygon overlap times z-interval overlap."""
    return float(_pairwise_iou(a.as_array()[None], b.as_array()[None], "3d")[0, 0])


def iou_bev(a: Box3D, b: Box3D) -> float:
    """Bird's-eye-view IoU of the two rotated rectangle footprints."""
    return float(_pairwise_iou(a.as_array()[None], b.as_array()[None], "bev")[0, 0])


def nms(boxes, scores, iou_threshold: float, iou_kind: str = "3d") -> list[int]:
    """Greedy non-maximum suppression.

    Indices are visited in descending-score order (ties broken by the lower
    original index); an index is kept iff its IoU with every previously kept
    index is strictly below the threshold. Returns kept indices in visit order.
    """
    arr = boxes if isinstance(boxes, np.ndarray) else boxes_to_array(boxes)
    scores = np.asarray(scores, dtype=np.float64)
    if arr.shape[0] != scores.shape[0]:
        raise ValueError(
            f"boxes and scores length mismatch: {arr.shape[0]} vs {scores.shape[0]}"
        )
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou threshold must be in [0, 1], got {iou_threshold}")
    n = arr.shape[0]
    if n == 0:
        return []
    order = np.argsort(-scores, kind="stable")
    ious = _pairwise_iou(arr, arr, iou_kind)
    suppressed = np.zeros(n, dtype=bool)
    kept: list[int] = []
    for idx in order:
        if suppressed[idx]:
            continue
        kept.append(int(idx))
        suppressed |= ious[idx] >= iou_threshold
    return kept
