"""Deterministic synthetic multi-season dataset generator.

Desk-scale stand-in for a real view-sequence dataset: a camera moves at
constant speed along a planar path; planted landmark clusters project to
moving image patches that emit point tracks and per-frame boxes, while
clutter tracks keep the per-frame feature count at the configured target.
Season differences are descriptor noise plus per-cluster persistence flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

CLUTTER_LABEL = -1


@dataclass(frozen=True)
class ClusterSpec:
    center_s: float  # travel distance of the cluster center along the path
    n_points: int
    persistence: Tuple[bool, ...]  # one flag per season

    def __post_init__(self) -> None:
        if self.n_points <= 0:
            raise ValueError("cluster must have a positive point count")


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 7
    map_length: float = 1000.0
    frame_spacing: float = 0.5
    image_width: float = 400.0
    image_height: float = 300.0
    sensing_range: float = 20.0
    features_per_frame: int = 1500
    clutter_rate: float = 1.0  # probability each missing feature slot is refilled
    box_miss_prob: float = 0.1
    descriptor_dim: int = 16
    season_noise_sigma: Tuple[float, ...] = (0.6, 1.0, 1.4, 1.8)
    clusters: Tuple[ClusterSpec, ...] = ()
    path_amplitude: float = 20.0
    path_wavelength: float = 400.0

    def __post_init__(self) -> None:
        for p in (self.clutter_rate, self.box_miss_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("rates and probabilities must lie in [0, 1]")
        if self.map_length <= 0 or self.frame_spacing <= 0:
            raise ValueError("map length and frame spacing must be positive")
        for c in self.clusters:
            if len(c.persistence) != self.season_count:
                raise ValueError("cluster persistence flags must cover every season")

    @property
    def season_count(self) -> int:
        return len(self.season_noise_sigma)

    @property
    def frame_count(self) -> int:
        return int(self.map_length / self.frame_spacing) + 1


def default_world(
    seed: int = 7,
    map_length: float = 1000.0,
    features_per_frame: int = 300,
    n_clusters: int = 5,
    points_per_cluster: int = 60,
    seasons: int = 4,
) -> WorldSpec:
    """Default desk-scale world: evenly spaced clusters, one seasonal dropout.

    Cluster windows cover roughly 20% of the travel axis at the default
    sensing range.
    """
    sigma = (0.6, 1.0, 1.4, 1.8)[:seasons] if seasons <= 4 else tuple(
        0.6 + 0.4 * i for i in range(seasons)
    )
    clusters = []
    for i in range(n_clusters):
        center = map_length * (0.10 + 0.18 * i)
        persistence = [True] * seasons
        # last cluster disappears in the final season: exercises cross-season
        # dissimilarity without disturbing per-season mining
        if seasons > 1 and i == n_clusters - 1:
            persistence[seasons - 1] = False
        clusters.append(ClusterSpec(center, points_per_cluster, tuple(persistence)))
    return WorldSpec(
        seed=seed,
        map_length=map_length,
        features_per_frame=features_per_frame,
        season_noise_sigma=sigma,
        clusters=tuple(clusters),
    )


@dataclass(frozen=True)
class GroundTruth:
    """Planted labels: trajectory id -> cluster index, or -1 for clutter."""

    labels: Mapping[int, int]
    frame_s: Mapping[int, float]


@dataclass
class SeasonData:
    season: int
    spec: WorldSpec
    track_records: List[Tuple[int, int, float, float]]  # (frame, tid, x, y)
    box_records: List[Tuple[int, int, float, float, float, float]]
    pose_records: List[Tuple[int, float, float, float]]  # (frame, s, x, y)
    descriptors: Dict[int, np.ndarray]
    ground_truth: GroundTruth


def _path_xy(spec: WorldSpec, s: float) -> Tuple[float, float]:
    y = spec.path_amplitude * math.sin(2.0 * math.pi * s / spec.path_wavelength)
    return (s, y)


def cluster_prototypes(spec: WorldSpec) -> np.ndarray:
    """Cluster descriptor prototypes plus a background row (last)."""
    rng = np.random.default_rng((spec.seed, 3000))
    return rng.standard_normal((len(spec.clusters) + 1, spec.descriptor_dim))


def _cluster_geometry(spec: WorldSpec, cluster_idx: int):
    """Per-point along-path offsets (m) and image-row offsets (px)."""
    rng = np.random.default_rng((spec.seed, 1000 + cluster_idx))
    c = spec.clusters[cluster_idx]
    dx = rng.uniform(-3.0, 3.0, c.n_points)
    dy = rng.uniform(-40.0, 40.0, c.n_points)
    return dx, dy


def generate_season(spec: WorldSpec, season: int) -> SeasonData:
    """Emit one season's tracks, boxes, poses, descriptors and ground truth."""
    if not 0 <= season < spec.season_count:
        raise ValueError(f"season {season} out of range")
    rng = np.random.default_rng((spec.seed, 2000 + season))
    sigma = spec.season_noise_sigma[season]
    width, height = spec.image_width, spec.image_height
    r = spec.sensing_range
    protos = cluster_prototypes(spec)
    v_base = 0.30 * height

    # planted point schedules: (first_frame, last_frame, u per frame, v)
    planted = []  # (cluster idx, point idx, first frame, u array, v)
    geometries = [_cluster_geometry(spec, i) for i in range(len(spec.clusters))]
    for ci, cluster in enumerate(spec.clusters):
        if not cluster.persistence[season]:
            continue
        dx, dy = geometries[ci]
        for pi in range(cluster.n_points):
            p_s = cluster.center_s + dx[pi]
            f0 = max(0, math.ceil((p_s - r) / spec.frame_spacing))
            f1 = min(spec.frame_count - 1, math.floor((p_s + r) / spec.frame_spacing))
            if f1 < f0:
                continue
            frames_s = np.arange(f0, f1 + 1) * spec.frame_spacing
            u = width * (p_s - frames_s + r) / (2.0 * r)
            v = float(np.clip(v_base + dy[pi], 0.0, height))
            planted.append((ci, pi, f0, np.clip(u, 0.0, width), v))

    spawn_at: Dict[int, List[int]] = {}
    for k, (_, _, f0, _, _) in enumerate(planted):
        spawn_at.setdefault(f0, []).append(k)

    next_tid = 0
    labels: Dict[int, int] = {}
    track_records: List[Tuple[int, int, float, float]] = []
    box_records: List[Tuple[int, int, float, float, float, float]] = []
    pose_records: List[Tuple[int, float, float, float]] = []
    descriptors: Dict[int, np.ndarray] = {}
    next_box_id = 0

    # live planted tracks: tid -> (u array, v, first frame, last frame, cluster)
    live_planted: Dict[int, Tuple[np.ndarray, float, int, int, int]] = {}
    # live clutter tracks: tid -> [u, v, du, dv, death frame]
    live_clutter: Dict[int, List[float]] = {}

    for frame in range(spec.frame_count):
        s_t = frame * spec.frame_spacing
        x_t, y_t = _path_xy(spec, s_t)
        pose_records.append((frame, s_t, x_t, y_t))

        for k in spawn_at.get(frame, ()):
            ci, _, f0, u, v = planted[k]
            live_planted[next_tid] = (u, v, f0, f0 + len(u) - 1, ci)
            labels[next_tid] = ci
            next_tid += 1

        frame_updates: List[Tuple[int, float, float]] = []
        cluster_points: Dict[int, List[Tuple[float, float]]] = {}
        dead = []
        for tid, (u, v, f0, f1, ci) in live_planted.items():
            if frame > f1:
                dead.append(tid)
                continue
            x = float(u[frame - f0])
            frame_updates.append((tid, x, v))
            cluster_points.setdefault(ci, []).append((x, v))
        for tid in dead:
            del live_planted[tid]

        dead = []
        clutter_band = (0.55 * height, height)
        for tid, state in live_clutter.items():
            u, v, du, dv, death = state
            u += du
            v += dv
            # clutter stays in its own image band so it never lands inside a
            # landmark box; leaving the band kills the track like losing it
            if frame >= death or not (0.0 <= u <= width) or not (
                clutter_band[0] <= v <= clutter_band[1]
            ):
                dead.append(tid)
                continue
            state[0], state[1] = u, v
            frame_updates.append((tid, u, v))
        for tid in dead:
            del live_clutter[tid]

        deficit = spec.features_per_frame - len(frame_updates)
        for _ in range(max(0, deficit)):
            if rng.random() >= spec.clutter_rate:
                continue
            u = rng.uniform(0.0, width)
            v = rng.uniform(0.58 * height, 0.97 * height)
            du = rng.uniform(-1.0, 1.0)
            dv = rng.uniform(-0.3, 0.3)
            death = frame + 1 + rng.geometric(1.0 / 60.0)
            live_clutter[next_tid] = [u, v, du, dv, death]
            labels[next_tid] = CLUTTER_LABEL
            frame_updates.append((next_tid, u, v))
            next_tid += 1

        for tid, x, y in frame_updates:
            track_records.append((frame, tid, x, y))

        visible = sorted(cluster_points)
        for ci in visible:
            pts = cluster_points[ci]
            if rng.random() < spec.box_miss_prob:
                continue
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            x0 = max(0.0, min(xs) - 2.0)
            x1 = min(width, max(xs) + 2.0)
            y0 = max(0.0, min(ys) - 2.0)
            y1 = min(height, max(ys) + 2.0)
            if x1 > x0 and y1 > y0:
                box_records.append((next_box_id, frame, x0, y0, x1, y1))
                next_box_id += 1

        if visible:
            nearest = min(
                visible, key=lambda c: abs(spec.clusters[c].center_s - s_t)
            )
            proto = protos[nearest]
        else:
            proto = protos[-1]
        descriptors[frame] = proto + sigma * rng.standard_normal(spec.descriptor_dim)

    gt = GroundTruth(
        labels=labels,
        frame_s={f: s for f, s, _, _ in pose_records},
    )
    return SeasonData(
        season=season,
        spec=spec,
        track_records=track_records,
        box_records=box_records,
        pose_records=pose_records,
        descriptors=descriptors,
        ground_truth=gt,
    )


def _comb2(n: int) -> int:
    return n * (n - 1) // 2


def planted_ari(predicted: Mapping[int, int], truth: Mapping[int, int]) -> float:
    """Adjusted Rand index between a mined grouping and the planted one.

    `predicted` must label every ground-truth trajectory (the discarded set
    counts as one group); computed from the contingency table.
    """
    missing = [t for t in truth if t not in predicted]
    if missing:
        raise ValueError(f"{len(missing)} ground-truth trajectories unlabeled")
    items = sorted(truth)
    n = len(items)
    if n == 0:
        return 1.0
    contingency: Dict[Tuple[int, int], int] = {}
    row_sums: Dict[int, int] = {}
    col_sums: Dict[int, int] = {}
    for t in items:
        key = (predicted[t], truth[t])
        contingency[key] = contingency.get(key, 0) + 1
        row_sums[predicted[t]] = row_sums.get(predicted[t], 0) + 1
        col_sums[truth[t]] = col_sums.get(truth[t], 0) + 1
    sum_nij = sum(_comb2(v) for v in contingency.values())
    sum_a = sum(_comb2(v) for v in row_sums.values())
    sum_b = sum(_comb2(v) for v in col_sums.values())
    total = _comb2(n)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return (sum_nij - expected) / (max_index - expected)
