"""Shared domain types for the map-segmentation pipeline.

All types are immutable after construction and safe to share across
concurrent evaluation runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Mapping, Optional, Sequence, Tuple

# Trajectory vertex ids and box vertex ids live in disjoint integer ranges
# so bipartiteness checks are cheap.  Box vertices are offset by this base.
BOX_VERTEX_OFFSET = 1 << 40


def box_vertex(box_id: int) -> int:
    """Graph vertex id for an object-box id."""
    return BOX_VERTEX_OFFSET + box_id


def is_box_vertex(vertex: int) -> bool:
    return vertex >= BOX_VERTEX_OFFSET


def box_id_of(vertex: int) -> int:
    """Inverse of :func:`box_vertex`."""
    return vertex - BOX_VERTEX_OFFSET


@dataclass(frozen=True)
class PointTrajectory:
    """A tracked feature's spatio-temporal curve.

    `samples` is an ordered tuple of (frame, x, y).  Frames must be strictly
    increasing and contiguous: a trajectory ends when the feature is lost and
    its id is never reused.
    """

    id: int
    samples: Tuple[Tuple[int, float, float], ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError(f"trajectory {self.id}: empty sample list")
        frames = [f for f, _, _ in self.samples]
        for a, b in zip(frames, frames[1:]):
            if b != a + 1:
                raise ValueError(
                    f"trajectory {self.id}: frames not contiguous ({a} -> {b})"
                )

    @property
    def first_frame(self) -> int:
        return self.samples[0][0]

    @property
    def last_frame(self) -> int:
        return self.samples[-1][0]

    def point_at(self, frame: int) -> Optional[Tuple[float, float]]:
        """(x, y) at `frame`, or None if the trajectory is not alive there."""
        i = frame - self.first_frame
        if 0 <= i < len(self.samples):
            _, x, y = self.samples[i]
            return (x, y)
        return None


@dataclass(frozen=True)
class ObjectBox:
    """A per-frame class-agnostic object bounding box (pixels)."""

    id: int
    frame: int
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box {self.id}: degenerate extent")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, x: float, y: float) -> bool:
        """Inclusive-boundary membership test."""
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class TrajectoryGraph:
    """Weighted bipartite graph over trajectory and box vertices.

    Every edge joins one trajectory vertex and one box vertex; edges are
    stored canonically as (trajectory vertex, box vertex, weight).
    """

    trajectory_vertices: FrozenSet[int]
    box_vertices: FrozenSet[int]
    edges: Tuple[Tuple[int, int, float], ...]

    @property
    def vertices(self) -> FrozenSet[int]:
        return self.trajectory_vertices | self.box_vertices

    def with_weights(self, weights: Sequence[float]) -> "TrajectoryGraph":
        if len(weights) != len(self.edges):
            raise ValueError("weight vector length mismatch")
        new_edges = tuple(
            (u, v, float(w)) for (u, v, _), w in zip(self.edges, weights)
        )
        return TrajectoryGraph(self.trajectory_vertices, self.box_vertices, new_edges)


@dataclass(frozen=True)
class Partition:
    """Node-to-segment labeling; segment ids form a contiguous 0..C-1 range."""

    labels: Mapping[int, int]

    @property
    def component_count(self) -> int:
        return len(set(self.labels.values()))

    def groups(self) -> Dict[int, FrozenSet[int]]:
        out: Dict[int, set] = {}
        for v, lab in self.labels.items():
            out.setdefault(lab, set()).add(v)
        return {lab: frozenset(vs) for lab, vs in out.items()}


@dataclass(frozen=True)
class Multicut:
    """Cut indicator y_e per edge index, aligned with TrajectoryGraph.edges."""

    cut: Tuple[int, ...]

    def __post_init__(self) -> None:
        if any(y not in (0, 1) for y in self.cut):
            raise ValueError("cut indicators must be 0 or 1")


@dataclass(frozen=True)
class MapSegment:
    """A mined place class.

    frame_boxes maps a frame id to the axis-aligned bbox (pixels) of the
    member trajectory points in that frame; viewpoint_span is the set of
    travel-distance samples (meters) where the segment is observed.
    """

    id: int
    trajectory_ids: FrozenSet[int]
    box_ids: FrozenSet[int]
    frame_boxes: Mapping[int, Tuple[float, float, float, float]]
    viewpoint_span: FrozenSet[float]


class PoseLog:
    """Per-frame ground-truth travel distance and world position."""

    def __init__(self, records: Sequence[Tuple[int, float, float, float]]):
        recs = sorted(records)
        prev_s = -math.inf
        for _, s, _, _ in recs:
            if s < prev_s:
                raise ValueError("travel distance must be non-decreasing in frame")
            prev_s = s
        self._index = {f: i for i, (f, _, _, _) in enumerate(recs)}
        self.frames = tuple(f for f, _, _, _ in recs)
        self.s = tuple(s for _, s, _, _ in recs)
        self.xy = tuple((x, y) for _, _, x, y in recs)

    def __len__(self) -> int:
        return len(self.frames)

    def __contains__(self, frame: int) -> bool:
        return frame in self._index

    def s_at(self, frame: int) -> float:
        return self.s[self._index[frame]]

    def xy_at(self, frame: int) -> Tuple[float, float]:
        return self.xy[self._index[frame]]

    @property
    def length(self) -> float:
        return self.s[-1] if self.s else 0.0


def validate_graph(g: TrajectoryGraph) -> Optional[str]:
    """Return the first violated graph invariant, or None when valid."""
    if g.trajectory_vertices & g.box_vertices:
        return "vertex id appears in both trajectory and box sets"
    seen = set()
    for u, v, w in g.edges:
        t_end = (u in g.trajectory_vertices) + (v in g.trajectory_vertices)
        b_end = (u in g.box_vertices) + (v in g.box_vertices)
        if t_end != 1 or b_end != 1:
            return f"non-bipartite edge ({u}, {v})"
        key = (min(u, v), max(u, v))
        if key in seen:
            return f"duplicate edge ({u}, {v})"
        seen.add(key)
        if not math.isfinite(w):
            return f"non-finite weight on edge ({u}, {v})"
    return None


def partition_to_multicut(g: TrajectoryGraph, p: Partition) -> Multicut:
    """Cut indicator from a labeling: y_e = 1 iff the endpoints differ."""
    cut = []
    for u, v, _ in g.edges:
        if u not in p.labels or v not in p.labels:
            missing = u if u not in p.labels else v
            raise ValueError(f"vertex {missing} has no label")
        cut.append(0 if p.labels[u] == p.labels[v] else 1)
    return Multicut(tuple(cut))
