import itertools
import math
import random

import pytest
from hypothesis import given, strategies as st

from mapseg.core import (
    MapSegment,
    ObjectBox,
    Partition,
    PointTrajectory,
    PoseLog,
    TrajectoryGraph,
    box_vertex,
)
from mapseg.segments import (
    MiningConfig,
    baseline_equal_length,
    compute_stats,
    export_obb_annotations,
    jaccard,
    jaccard_cross_season,
    mine_segments,
    rectangle_union_area,
    segment_cells,
)

EXTENT = (400.0, 300.0)


def straight_poses(n, step=1.0):
    return PoseLog([(f, f * step, f * step, 0.0) for f in range(n)])


def simple_segment(seg_id=0, frames=(0, 1), bb=(0.0, 0.0, 150.0, 120.0)):
    return MapSegment(
        id=seg_id,
        trajectory_ids=frozenset({1}),
        box_ids=frozenset(),
        frame_boxes={f: bb for f in frames},
        viewpoint_span=frozenset(float(f) for f in frames),
    )


class TestMine:
    def build(self, n_traj, n_boxes):
        trajectories = {
            t: PointTrajectory(t, ((0, 10.0 + t, 20.0), (1, 11.0 + t, 21.0)))
            for t in range(n_traj)
        }
        boxes = {
            b: ObjectBox(b, 0, 0.0, 0.0, 100.0, 100.0) for b in range(n_boxes)
        }
        g = TrajectoryGraph(
            frozenset(trajectories),
            frozenset(box_vertex(b) for b in boxes),
            tuple((t, box_vertex(0), 1.0) for t in trajectories if boxes),
        )
        labels = {v: 0 for v in g.vertices}
        return g, Partition(labels), trajectories, boxes

    def test_component_meeting_thresholds_becomes_segment(self):
        g, p, trajs, boxes = self.build(10, 2)
        segs, discarded = mine_segments(g, p, trajs, boxes, straight_poses(3))
        assert len(segs) == 1 and not discarded
        seg = segs[0]
        assert seg.trajectory_ids == frozenset(range(10))
        assert set(seg.frame_boxes) == {0, 1}
        # frame box encloses all member points at that frame
        x0, y0, x1, y1 = seg.frame_boxes[0]
        assert (x0, x1) == (10.0, 19.0) and (y0, y1) == (20.0, 20.0)
        assert seg.viewpoint_span == frozenset({0.0, 1.0})

    def test_too_few_trajectories_discarded(self):
        g, p, trajs, boxes = self.build(3, 2)
        segs, discarded = mine_segments(g, p, trajs, boxes, straight_poses(3))
        assert segs == [] and discarded == g.vertices

    def test_no_box_vertex_discarded(self):
        g, p, trajs, boxes = self.build(10, 0)
        segs, discarded = mine_segments(g, p, trajs, boxes, straight_poses(3))
        assert segs == [] and discarded == g.vertices

    def test_missing_pose_rejected(self):
        g, p, trajs, boxes = self.build(10, 2)
        with pytest.raises(KeyError):
            mine_segments(g, p, trajs, boxes, PoseLog([(0, 0.0, 0.0, 0.0)]))

    def test_vertices_partition_into_segments_and_discarded(self):
        g, p, trajs, boxes = self.build(10, 2)
        segs, discarded = mine_segments(g, p, trajs, boxes, straight_poses(3))
        covered = set(discarded)
        for seg in segs:
            covered |= set(seg.trajectory_ids) | set(seg.box_ids)
        assert covered == g.vertices


class TestRectangleUnion:
    def brute_area(self, boxes, resolution=1.0):
        # raster oracle on integer-aligned boxes
        cells = set()
        for x0, y0, x1, y1 in boxes:
            for i in range(int(x0), int(x1)):
                for j in range(int(y0), int(y1)):
                    cells.add((i, j))
        return len(cells) * resolution

    def test_disjoint(self):
        boxes = [(0, 0, 2, 2), (5, 5, 7, 7)]
        assert rectangle_union_area(boxes) == pytest.approx(8.0)

    def test_overlap_counted_once(self):
        boxes = [(0, 0, 2, 2), (1, 1, 3, 3)]
        assert rectangle_union_area(boxes) == pytest.approx(7.0)

    def test_matches_raster_oracle(self):
        rng = random.Random(5)
        for _ in range(30):
            boxes = []
            for _ in range(rng.randint(1, 8)):
                x0 = rng.randint(0, 15)
                y0 = rng.randint(0, 15)
                boxes.append(
                    (x0, y0, x0 + rng.randint(1, 6), y0 + rng.randint(1, 6))
                )
            assert rectangle_union_area(boxes) == pytest.approx(
                self.brute_area(boxes)
            )


class TestStats:
    def test_image_ratio(self):
        segs = [simple_segment(frames=(1, 2))]
        stats = compute_stats(segs, range(10), EXTENT)
        assert stats.retained_image_ratio == pytest.approx(0.2)

    def test_full_cover_frame_contributes_one(self):
        segs = [simple_segment(frames=(0,), bb=(0.0, 0.0, 400.0, 300.0))]
        stats = compute_stats(segs, [0], EXTENT)
        assert stats.retained_pixel_ratio == pytest.approx(1.0)

    def test_union_semantics_for_identical_boxes(self):
        bb = (0.0, 0.0, 200.0, 60.0)  # 10% of 400x300
        segs = [simple_segment(0, (0,), bb), simple_segment(1, (0,), bb)]
        stats = compute_stats(segs, [0], EXTENT)
        assert stats.retained_pixel_ratio == pytest.approx(0.10)

    def test_pixel_ratio_bounded_by_image_ratio(self):
        rng = random.Random(6)
        for _ in range(20):
            segs = [
                simple_segment(
                    i,
                    tuple(sorted(rng.sample(range(8), rng.randint(1, 4)))),
                    (0.0, 0.0, rng.uniform(1, 400), rng.uniform(1, 300)),
                )
                for i in range(rng.randint(1, 4))
            ]
            stats = compute_stats(segs, range(8), EXTENT)
            assert 0.0 <= stats.retained_pixel_ratio <= stats.retained_image_ratio <= 1.0


class TestJaccard:
    def test_definition(self):
        a = frozenset({1, 2, 3})
        b = frozenset({2, 3, 4})
        assert jaccard(a, b) == pytest.approx(0.5)

    def test_identical_sets(self):
        a = frozenset({1, 2})
        assert jaccard(a, a) == 1.0

    def test_disjoint_sets(self):
        assert jaccard(frozenset({1}), frozenset({2})) == 0.0

    @given(
        st.frozensets(st.integers(0, 20), max_size=10),
        st.frozensets(st.integers(0, 20), max_size=10),
    )
    def test_symmetric_and_bounded(self, a, b):
        assert jaccard(a, b) == jaccard(b, a)
        assert 0.0 <= jaccard(a, b) <= 1.0
        assert (jaccard(a, b) == 1.0) == (a == b)
        if a and b:
            assert (jaccard(a, b) == 0.0) == (not a & b)

    def test_cross_season_self_comparison(self):
        poses = straight_poses(30)
        segs = [simple_segment(0, tuple(range(0, 25)))]
        per_query, summary = jaccard_cross_season(segs, poses, segs, poses)
        assert per_query == [(0, 1.0, False)]
        assert summary["zero_ratio"] == 0.0
        assert summary["nonzero_median"] == 1.0

    def test_shifted_copy_strictly_between(self):
        poses = straight_poses(40)
        q = [simple_segment(0, (0, 10, 20))]  # cells 0, 1, 2
        r = [simple_segment(0, (10, 20, 30))]  # cells 1, 2, 3
        per_query, _ = jaccard_cross_season(q, poses, r, poses)
        assert per_query[0][1] == pytest.approx(2 / 4)

    def test_empty_segment_flagged_zero(self):
        poses = straight_poses(5)
        q = [
            MapSegment(0, frozenset({1}), frozenset(), {}, frozenset()),
        ]
        per_query, _ = jaccard_cross_season(q, poses, [simple_segment()], poses)
        assert per_query == [(0, 0.0, True)]

    def test_grid_cells_half_open(self):
        poses = PoseLog([(0, 0.0, 10.0, -0.1), (1, 1.0, 9.99, 0.0)])
        seg = simple_segment(frames=(0, 1))
        cells = segment_cells(seg, poses, 10.0)
        assert cells == frozenset({(1, -1), (0, 0)})


class TestBaseline:
    def trajs(self):
        return {1: PointTrajectory(1, ((0, 1.0, 1.0), (1, 2.0, 2.0)))}

    def test_exact_division(self):
        poses = straight_poses(101)  # 0..100 m
        segs = baseline_equal_length(poses, self.trajs(), EXTENT, 10.0)
        assert len(segs) == 10

    def test_remainder_interval(self):
        poses = straight_poses(106)  # 0..105 m
        segs = baseline_equal_length(poses, self.trajs(), EXTENT, 10.0)
        assert len(segs) == 11
        assert len(segs[-1].frame_boxes) == 6  # s = 100..105

    def test_single_interval_when_length_exceeds_map(self):
        poses = straight_poses(11)
        segs = baseline_equal_length(poses, self.trajs(), EXTENT, 100.0)
        assert len(segs) == 1

    def test_tiles_travel_axis_without_gaps_or_overlap(self):
        poses = straight_poses(57, step=0.7)
        segs = baseline_equal_length(poses, self.trajs(), EXTENT, 5.0)
        seen = [f for seg in segs for f in seg.frame_boxes]
        assert sorted(seen) == list(poses.frames)
        assert len(seen) == len(set(seen))

    def test_members_are_alive_trajectories(self):
        poses = straight_poses(30)
        segs = baseline_equal_length(poses, self.trajs(), EXTENT, 10.0)
        assert segs[0].trajectory_ids == frozenset({1})
        assert segs[1].trajectory_ids == frozenset()

    def test_frame_boxes_are_full_extent(self):
        poses = straight_poses(5)
        segs = baseline_equal_length(poses, self.trajs(), EXTENT, 10.0)
        assert segs[0].frame_boxes[0] == (0.0, 0.0, 400.0, 300.0)


class TestExport:
    def test_large_box_exported(self):
        recs = export_obb_annotations([simple_segment(bb=(0, 0, 150, 120))])
        assert len(recs) == 2
        assert recs[0]["class_id"] == 0

    def test_narrow_box_omitted(self):
        recs = export_obb_annotations([simple_segment(bb=(0, 0, 99, 500))])
        assert recs == []

    def test_empty_input(self):
        assert export_obb_annotations([]) == []


class TestConfig:
    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            MiningConfig(min_trajectories_per_segment=0)
