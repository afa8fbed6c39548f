"""Mining minimal map segments and map-maintenance metrics."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Set, Tuple

import numpy as np

from . import _kernels
from .core import (
    MapSegment,
    ObjectBox,
    Partition,
    PointTrajectory,
    PoseLog,
    TrajectoryGraph,
    is_box_vertex,
)


@dataclass(frozen=True)
class MiningConfig:
    min_trajectories_per_segment: int = 5
    min_boxes_per_segment: int = 1
    bbox_min_pixels: int = 100
    grid_cell_meters: float = 10.0

    def __post_init__(self) -> None:
        if (
            self.min_trajectories_per_segment <= 0
            or self.min_boxes_per_segment <= 0
            or self.bbox_min_pixels <= 0
            or self.grid_cell_meters <= 0
        ):
            raise ValueError("all mining thresholds must be positive")


@dataclass(frozen=True)
class SegmentStats:
    class_count: int
    traj_count_mean: float
    traj_count_std: float
    retained_image_ratio: float  # R_i
    retained_pixel_ratio: float  # R_p
    per_image_pixel_mean: float  # mean union fraction over covered frames
    per_image_pixel_max: float


def mine_segments(
    g: TrajectoryGraph,
    partition: Partition,
    trajectories: Mapping[int, PointTrajectory],
    boxes: Mapping[int, ObjectBox],
    poses: PoseLog,
    cfg: MiningConfig = MiningConfig(),
) -> Tuple[List[MapSegment], FrozenSet[int]]:
    """Turn partition components into map segments plus the discarded set.

    A component survives only with enough member trajectories and at least
    one supporting box vertex; everything else is the discarded remainder.
    """
    groups: Dict[int, List[int]] = {}
    for v in g.vertices:
        groups.setdefault(partition.labels[v], []).append(v)

    segments: List[MapSegment] = []
    discarded: Set[int] = set()
    next_id = 0
    for lab in sorted(groups, key=lambda l: min(groups[l])):
        members = groups[lab]
        tids = sorted(v for v in members if not is_box_vertex(v))
        bids = sorted(v for v in members if is_box_vertex(v))
        if (
            len(tids) < cfg.min_trajectories_per_segment
            or len(bids) < cfg.min_boxes_per_segment
        ):
            discarded.update(members)
            continue
        frame_points: Dict[int, List[Tuple[float, float]]] = {}
        for tid in tids:
            for frame, x, y in trajectories[tid].samples:
                frame_points.setdefault(frame, []).append((x, y))
        frame_boxes = {}
        span = set()
        for frame, pts in sorted(frame_points.items()):
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            frame_boxes[frame] = (min(xs), min(ys), max(xs), max(ys))
            if frame not in poses:
                raise KeyError(f"no pose for frame {frame} referenced by a segment")
            span.add(poses.s_at(frame))
        segments.append(
            MapSegment(
                id=next_id,
                trajectory_ids=frozenset(tids),
                box_ids=frozenset(bids),
                frame_boxes=frame_boxes,
                viewpoint_span=frozenset(span),
            )
        )
        next_id += 1
    return segments, frozenset(discarded)


def rectangle_union_area(boxes: Sequence[Tuple[float, float, float, float]]) -> float:
    """Exact union area by coordinate-compression sweep, no rasterization."""
    if not boxes:
        return 0.0
    return float(_kernels.rect_union_area(np.asarray(boxes, dtype=np.float64)))


def compute_stats(
    segments: Sequence[MapSegment],
    all_frames: Iterable[int],
    image_extent: Tuple[float, float],
) -> SegmentStats:
    frames = set(all_frames)
    if not frames:
        raise ValueError("empty frame set")
    width, height = image_extent
    image_area = width * height

    per_frame_boxes: Dict[int, List[Tuple[float, float, float, float]]] = {}
    for seg in segments:
        for frame, bb in seg.frame_boxes.items():
            per_frame_boxes.setdefault(frame, []).append(bb)

    covered = [f for f in per_frame_boxes if f in frames]
    fractions = [
        min(rectangle_union_area(per_frame_boxes[f]) / image_area, 1.0)
        for f in covered
    ]
    r_i = len(covered) / len(frames)
    r_p = sum(fractions) / len(frames)

    counts = [len(seg.trajectory_ids) for seg in segments]
    return SegmentStats(
        class_count=len(segments),
        traj_count_mean=float(statistics.mean(counts)) if counts else 0.0,
        traj_count_std=float(statistics.pstdev(counts)) if counts else 0.0,
        retained_image_ratio=r_i,
        retained_pixel_ratio=r_p,
        per_image_pixel_mean=float(statistics.mean(fractions)) if fractions else 0.0,
        per_image_pixel_max=max(fractions, default=0.0),
    )


def segment_cells(
    segment: MapSegment, poses: PoseLog, cell_meters: float
) -> FrozenSet[Tuple[int, int]]:
    """Grid-cell ids visited by a segment; cells are half-open, origin (0,0)."""
    cells = set()
    for frame in segment.frame_boxes:
        x, y = poses.xy_at(frame)
        cells.add((math.floor(x / cell_meters), math.floor(y / cell_meters)))
    return frozenset(cells)


def jaccard(a: FrozenSet, b: FrozenSet) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def jaccard_cross_season(
    segments_q: Sequence[MapSegment],
    poses_q: PoseLog,
    segments_r: Sequence[MapSegment],
    poses_r: PoseLog,
    cell_meters: float = 10.0,
):
    """Per-query-segment best cross-season similarity plus a summary.

    Both pose logs must share the same world frame.  Returns
    (list of (segment id, best jaccard, empty-cells flag), summary dict).
    """
    ref_cells = [segment_cells(s, poses_r, cell_meters) for s in segments_r]
    per_query = []
    for seg in segments_q:
        cells = segment_cells(seg, poses_q, cell_meters)
        if not cells:
            per_query.append((seg.id, 0.0, True))
            continue
        best = max((jaccard(cells, rc) for rc in ref_cells if rc), default=0.0)
        per_query.append((seg.id, best, False))

    values = [v for _, v, _ in per_query]
    nonzero = [v for v in values if v > 0.0]
    summary = {
        "query_segments": len(per_query),
        "zero_ratio": (
            sum(1 for v in values if v == 0.0) / len(values) if values else 0.0
        ),
        "nonzero_max": max(nonzero, default=0.0),
        "nonzero_mean": float(statistics.mean(nonzero)) if nonzero else 0.0,
        "nonzero_median": float(statistics.median(nonzero)) if nonzero else 0.0,
    }
    return per_query, summary


def baseline_equal_length(
    poses: PoseLog,
    trajectories: Mapping[int, PointTrajectory],
    image_extent: Tuple[float, float],
    segment_length: float,
) -> List[MapSegment]:
    """Equal-length-subsequence baseline: tile the travel axis.

    Segments cover consecutive travel intervals of `segment_length`; the
    last interval keeps the remainder.  Frame boxes span the full image and
    members are all trajectories alive somewhere in the interval.
    """
    if segment_length <= 0:
        raise ValueError("segment length must be positive")
    if len(poses) == 0:
        return []
    width, height = image_extent
    total = poses.length
    n = max(1, math.ceil(total / segment_length)) if total > 0 else 1

    seg_frames: List[List[int]] = [[] for _ in range(n)]
    for frame, s in zip(poses.frames, poses.s):
        k = min(int(s // segment_length), n - 1)
        seg_frames[k].append(frame)

    segments = []
    for k in range(n):
        frames = seg_frames[k]
        frame_set = set(frames)
        members = frozenset(
            tid
            for tid, traj in trajectories.items()
            if any(f in frame_set for f, _, _ in traj.samples)
        )
        segments.append(
            MapSegment(
                id=k,
                trajectory_ids=members,
                box_ids=frozenset(),
                frame_boxes={f: (0.0, 0.0, width, height) for f in frames},
                viewpoint_span=frozenset(poses.s_at(f) for f in frames),
            )
        )
    return segments


def export_obb_annotations(
    segments: Sequence[MapSegment], bbox_min_pixels: int = 100
) -> List[Dict]:
    """Self-supervised OBB annotation records, skipping tiny boxes."""
    records = []
    for seg in segments:
        for frame, (x0, y0, x1, y1) in sorted(seg.frame_boxes.items()):
            if x1 - x0 < bbox_min_pixels or y1 - y0 < bbox_min_pixels:
                continue
            records.append(
                {
                    "frame": frame,
                    "class_id": seg.id,
                    "bbox": [x0, y0, x1, y1],
                }
            )
    return records
