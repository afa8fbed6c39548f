"""Topometric Monte Carlo localization along the travel-distance axis.

Particles ride the axis under a drift-free motion model and accumulate
likelihood additively from normalized perception updates; no resampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Set, Tuple

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class MclConfig:
    map_length: float  # D, meters
    d_norm: float = 1.0  # D_o: particle spacing normalizer
    correct_radius: float = 10.0
    nms_radius: float = 10.0
    start_spacing: float = 100.0
    top_x: Tuple[int, ...] = (10, 20, 50, 100, 200)

    def __post_init__(self) -> None:
        if min(
            self.map_length,
            self.d_norm,
            self.correct_radius,
            self.nms_radius,
            self.start_spacing,
        ) <= 0 or any(x <= 0 for x in self.top_x):
            raise ValueError("all MCL config values must be positive")

    @property
    def particle_count(self) -> int:
        return int(self.map_length // self.d_norm)


@dataclass
class ParticleSet:
    s: np.ndarray  # positions, kept in ascending order
    likelihood: np.ndarray
    map_length: float

    def __len__(self) -> int:
        return self.s.shape[0]


def init_particles(cfg: MclConfig) -> ParticleSet:
    """N = floor(D / D_o) particles evenly spread, zero likelihood."""
    n = cfg.particle_count
    s = (np.arange(n) + 0.5) * (cfg.map_length / n)
    return ParticleSet(s=s, likelihood=np.zeros(n), map_length=cfg.map_length)


def motion_update(particles: ParticleSet, ds: float) -> None:
    """Drift-free advance by exactly ds, clamped to the map end."""
    if ds < 0:
        raise ValueError("motion update distance must be non-negative")
    np.clip(particles.s + ds, 0.0, particles.map_length, out=particles.s)


def merge_spans(
    samples: Iterable[float], max_gap: float
) -> List[Tuple[float, float]]:
    """Merge scalar samples into disjoint closed intervals, bridging gaps."""
    pts = sorted(samples)
    if not pts:
        return []
    spans = []
    lo = hi = pts[0]
    for s in pts[1:]:
        if s - hi <= max_gap:
            hi = s
        else:
            spans.append((lo, hi))
            lo = hi = s
    spans.append((lo, hi))
    return spans


def _merge_intervals(spans: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    merged: List[Tuple[float, float]] = []
    for lo, hi in sorted(spans):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
        else:
            merged.append((lo, hi))
    return merged


def perception_update(
    particles: ParticleSet,
    raw_scores: Mapping[int, float],
    class_spans: Mapping[int, Sequence[Tuple[float, float]]],
) -> bool:
    """Spread raw class scores over in-span particles, normalize, accumulate.

    Each positive-score class splits its raw score uniformly across the
    particles lying in its (merged) viewpoint spans; the per-particle
    increments are then normalized to sum to 1 before being added.  Returns
    False when the update was skipped (no positive mass landed anywhere).
    """
    if any(v < 0 for v in raw_scores.values()):
        raise ValueError("raw scores must be non-negative")
    classes = sorted(c for c, v in raw_scores.items() if v > 0)
    if not classes:
        return False
    cls_idx = {c: i for i, c in enumerate(classes)}
    scores = np.array([raw_scores[c] for c in classes])
    lo_list, hi_list, cls_list = [], [], []
    for c in classes:
        for lo, hi in _merge_intervals(class_spans.get(c, ())):
            lo_list.append(lo)
            hi_list.append(hi)
            cls_list.append(cls_idx[c])
    if not lo_list:
        return False
    inc = _kernels.perception_increments(
        particles.s,
        np.array(lo_list),
        np.array(hi_list),
        np.array(cls_list, dtype=np.int64),
        scores,
    )
    total = inc.sum()
    if total <= 0.0:
        return False
    particles.likelihood += inc / total
    return True


def rank_and_nms(particles: ParticleSet, nms_radius: float) -> List[Tuple[float, float]]:
    """Likelihood-ranked hypotheses after greedy non-maximum suppression.

    Ordering is by descending likelihood with ties going to the smaller
    position; a hypothesis survives only if it is at least `nms_radius`
    away from every already-kept hypothesis.
    """
    order = np.lexsort((particles.s, -particles.likelihood))
    s_ranked = particles.s[order]
    keep = _kernels.nms_keep(s_ranked, nms_radius)
    lik = particles.likelihood[order]
    return [
        (float(s_ranked[i]), float(lik[i]))
        for i in range(len(order))
        if keep[i]
    ]


def evaluate_topx(
    runs: Sequence[Tuple[Sequence[Tuple[float, float]], float]],
    cfg: MclConfig,
) -> Dict[int, float]:
    """Top-X accuracy over (ranked hypotheses, ground-truth goal) runs.

    A run is correct at level X when any of its top X hypotheses lies
    strictly within the correct radius of the ground truth.
    """
    if not runs:
        raise ValueError("no runs to evaluate")
    table = {}
    for x in cfg.top_x:
        correct = sum(
            1
            for hyps, truth in runs
            if any(abs(s - truth) < cfg.correct_radius for s, _ in hyps[:x])
        )
        table[x] = correct / len(runs)
    return table


def filter_test_sequences(
    runs: Mapping[int, FrozenSet],
    map_cells: FrozenSet,
    segment_cells: FrozenSet,
    min_map_overlap: float = 0.8,
    min_segment_overlap: float = 0.10,
) -> List[int]:
    """Retain runs with enough overlap to the map and to mined segments.

    `runs` maps a run id to its discretized-viewpoint cell set.  A run is
    dropped when its map-cell overlap ratio is below `min_map_overlap` or
    its mined-segment overlap ratio is below `min_segment_overlap`.
    """
    retained = []
    for run_id in sorted(runs):
        cells = runs[run_id]
        if not cells:
            continue
        map_ratio = len(cells & map_cells) / len(cells)
        seg_ratio = len(cells & segment_cells) / len(cells)
        if map_ratio >= min_map_overlap and seg_ratio >= min_segment_overlap:
            retained.append(run_id)
    return retained
