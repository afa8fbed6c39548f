"""Incremental trajectory-graph construction and edge-weight bias.

Edges join a trajectory to an object box only at the box's arrival frame,
against the trajectory's point in that same frame; there is no retroactive
membership over a trajectory's history.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .core import ObjectBox, PointTrajectory, TrajectoryGraph, box_vertex


@dataclass(frozen=True)
class BiasReport:
    c_o: float
    edge_count: int
    weight_min: float
    weight_median: float
    weight_max: float
    degenerate: bool  # all weights equal, fallback rule applied


def membership_test(point: Tuple[float, float], box: ObjectBox) -> bool:
    """Inclusive-boundary point-in-box test."""
    return box.contains(point[0], point[1])


def compute_bias(weights: Sequence[float], q: float) -> float:
    """Bias c_o controlling segment sizes.

    Normally the weight at descending rank ceil(q * |E|) (rank 1 = maximum).
    When every weight is equal the rank statistic would zero all weights, so
    the degenerate fallback returns q times the common weight, keeping
    post-bias weights positive.
    """
    if not weights:
        raise ValueError("empty weight multiset")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"bias fraction must be in (0, 1], got {q}")
    ws = sorted(weights, reverse=True)
    if ws[0] == ws[-1]:
        return q * ws[0]
    k = math.ceil(q * len(ws))
    return float(ws[k - 1])


def bias_report(weights: Sequence[float], q: float) -> BiasReport:
    ws = sorted(weights)
    return BiasReport(
        c_o=compute_bias(weights, q),
        edge_count=len(ws),
        weight_min=ws[0],
        weight_median=float(statistics.median(ws)),
        weight_max=ws[-1],
        degenerate=(ws[0] == ws[-1]),
    )


def apply_bias(g: TrajectoryGraph, c_o: float) -> TrajectoryGraph:
    """Shift every edge weight by -c_o; vertex sets unchanged."""
    return g.with_weights([w - c_o for _, _, w in g.edges])


class GraphBuilder:
    """Single-writer incremental builder for the bipartite trajectory graph.

    affinity_mode "unit" fixes every edge weight at 1; "covisibility-count"
    increments the weight each frame a (trajectory, box id) pair co-occurs.
    For single-frame box ids the two modes coincide.
    """

    def __init__(
        self,
        image_width: float,
        image_height: float,
        affinity_mode: str = "unit",
        bias_fraction: float = 0.2,
    ):
        if affinity_mode not in ("unit", "covisibility-count"):
            raise ValueError(f"unknown affinity mode {affinity_mode!r}")
        if not 0.0 < bias_fraction <= 1.0:
            raise ValueError("bias fraction must be in (0, 1]")
        self.image_width = image_width
        self.image_height = image_height
        self.affinity_mode = affinity_mode
        self.bias_fraction = bias_fraction
        self._last_frame: Optional[int] = None
        self._samples: Dict[int, List[Tuple[int, float, float]]] = {}
        self._live: Dict[int, Tuple[float, float]] = {}  # tid -> point this frame
        self._retired: set = set()
        self._boxes: Dict[int, ObjectBox] = {}
        self._edges: Dict[Tuple[int, int], float] = {}

    def ingest_frame(
        self,
        frame: int,
        track_updates: Sequence[Tuple[int, float, float]],
        boxes: Sequence[ObjectBox],
    ) -> None:
        if self._last_frame is not None and frame <= self._last_frame:
            raise ValueError(f"out-of-order frame {frame} after {self._last_frame}")
        contiguous = self._last_frame is not None and frame == self._last_frame + 1

        current: Dict[int, Tuple[float, float]] = {}
        for tid, x, y in track_updates:
            if tid in current:
                raise ValueError(f"frame {frame}: duplicate update for trajectory {tid}")
            if not (0.0 <= x <= self.image_width and 0.0 <= y <= self.image_height):
                raise ValueError(
                    f"frame {frame}: trajectory {tid} point ({x}, {y}) outside image extent"
                )
            known = tid in self._samples
            alive = contiguous and tid in self._live
            if known and not alive:
                raise ValueError(
                    f"frame {frame}: trajectory id {tid} reused after a gap"
                )
            self._samples.setdefault(tid, []).append((frame, x, y))
            current[tid] = (x, y)

        # tracks not updated this frame are lost; their ids are retired
        self._retired.update(t for t in self._live if t not in current)
        self._live = current
        self._last_frame = frame

        for box in boxes:
            if box.frame != frame:
                raise ValueError(
                    f"box {box.id} carries frame {box.frame}, ingested at frame {frame}"
                )
            if box.id not in self._boxes:
                self._boxes[box.id] = box
            for tid, (x, y) in current.items():
                if box.contains(x, y):
                    key = (tid, box_vertex(box.id))
                    if self.affinity_mode == "covisibility-count":
                        self._edges[key] = self._edges.get(key, 0.0) + 1.0
                    else:
                        self._edges[key] = 1.0

    def finalize(self):
        """Freeze and return (graph, trajectories by id, boxes by id)."""
        trajectories = {
            tid: PointTrajectory(tid, tuple(samples))
            for tid, samples in self._samples.items()
        }
        graph = TrajectoryGraph(
            trajectory_vertices=frozenset(self._samples),
            box_vertices=frozenset(box_vertex(b) for b in self._boxes),
            edges=tuple((u, v, w) for (u, v), w in sorted(self._edges.items())),
        )
        return graph, trajectories, dict(self._boxes)
