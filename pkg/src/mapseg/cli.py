"""Pipeline front-end: synth, segment, eval and metrics subcommands.

Exit status: 0 success, 2 usage error, 3 data error, 4 internal invariant
violation.  All randomness flows from the dataset seed; reruns with the same
inputs and flags produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import statistics
import sys
from dataclasses import asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import io, mcl, multicut, placeclass, segments as segmod, synthworld, trackgraph
from .core import PoseLog, TrajectoryGraph, validate_graph
from .io import DataError, DatasetHeader
from .synthworld import CLUTTER_LABEL, WorldSpec

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

CODEBOOK_WORDS = 64
TOKEN_BAG_WINDOW = 5


# ---------------------------------------------------------------- synth


def _spec_from_file(path: str) -> WorldSpec:
    obj = io.load_json(path)
    try:
        clusters = tuple(
            synthworld.ClusterSpec(
                center_s=c["center_s"],
                n_points=c["n_points"],
                persistence=tuple(c["persistence"]),
            )
            for c in obj.pop("clusters", [])
        )
        if "season_noise_sigma" in obj:
            obj["season_noise_sigma"] = tuple(obj["season_noise_sigma"])
        return WorldSpec(clusters=clusters, **obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(path, 1, f"invalid world spec: {exc}") from exc


def write_season_dir(directory: str, data: synthworld.SeasonData) -> None:
    os.makedirs(directory, exist_ok=True)
    spec = data.spec
    io.write_header(
        directory,
        DatasetHeader(
            image_width=spec.image_width,
            image_height=spec.image_height,
            frame_count=spec.frame_count,
            map_length=spec.map_length,
            season=f"season_{data.season:02d}",
        ),
    )
    io.write_tracks(os.path.join(directory, "tracks.jsonl"), data.track_records)
    io.write_boxes(os.path.join(directory, "boxes.jsonl"), data.box_records)
    io.write_poses(os.path.join(directory, "poses.jsonl"), data.pose_records)
    io.write_descriptors(
        os.path.join(directory, "descriptors.jsonl"), data.descriptors
    )
    io.dump_json(
        os.path.join(directory, "ground_truth.json"),
        {"labels": {str(t): lab for t, lab in data.ground_truth.labels.items()}},
    )


def cmd_synth(args) -> int:
    spec = _spec_from_file(args.spec) if args.spec else synthworld.default_world()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    io.dump_json(os.path.join(args.out, "world.json"), asdict_spec(spec))
    for season in range(spec.season_count):
        data = synthworld.generate_season(spec, season)
        write_season_dir(os.path.join(args.out, f"season_{season:02d}"), data)
    return 0


def asdict_spec(spec: WorldSpec) -> dict:
    obj = asdict(spec)
    obj["clusters"] = [
        {
            "center_s": c["center_s"],
            "n_points": c["n_points"],
            "persistence": list(c["persistence"]),
        }
        for c in obj["clusters"]
    ]
    obj["season_noise_sigma"] = list(obj["season_noise_sigma"])
    return obj


# ---------------------------------------------------------------- segment


def build_graph_from_dir(dataset_dir: str, bias_fraction: float):
    """Ingest a season directory into a finalized trajectory graph."""
    header = io.read_header(dataset_dir)
    tracks = io.read_tracks_by_frame(os.path.join(dataset_dir, "tracks.jsonl"))
    boxes = io.read_boxes_by_frame(os.path.join(dataset_dir, "boxes.jsonl"))
    builder = trackgraph.GraphBuilder(
        header.image_width, header.image_height, bias_fraction=bias_fraction
    )
    for frame in sorted(set(tracks) | set(boxes)):
        builder.ingest_frame(frame, tracks.get(frame, ()), boxes.get(frame, ()))
    return header, builder.finalize()


def segment_dataset(dataset_dir: str, cfg: segmod.MiningConfig, bias_fraction: float):
    """trackgraph -> bias -> GAEC -> mining; the offline pipeline core."""
    header, (graph, trajectories, boxes) = build_graph_from_dir(
        dataset_dir, bias_fraction
    )
    violation = validate_graph(graph)
    if violation is not None:
        raise AssertionError(f"graph invariant violated: {violation}")
    poses = io.read_poses(os.path.join(dataset_dir, "poses.jsonl"))

    if graph.edges:
        weights = [w for _, _, w in graph.edges]
        report = trackgraph.bias_report(weights, bias_fraction)
        biased = trackgraph.apply_bias(graph, report.c_o)
    else:
        report = None
        biased = graph
    result = multicut.solve_gaec(biased)
    mined, discarded = segmod.mine_segments(
        graph, result.partition, trajectories, boxes, poses, cfg
    )
    return header, graph, trajectories, poses, report, result, mined, discarded


def _mining_config(args) -> segmod.MiningConfig:
    return segmod.MiningConfig(
        min_trajectories_per_segment=args.min_trajectories,
        min_boxes_per_segment=args.min_boxes,
        bbox_min_pixels=args.bbox_min_pixels,
    )


def cmd_segment(args) -> int:
    cfg = _mining_config(args)
    os.makedirs(args.out, exist_ok=True)

    if args.baseline:
        kind, _, value = args.baseline.partition("=")
        if kind != "equal-length" or not value:
            raise DataError(args.baseline, 0, "baseline must be equal-length=<meters>")
        header = io.read_header(args.dataset)
        poses = io.read_poses(os.path.join(args.dataset, "poses.jsonl"))
        tracks = io.read_tracks_by_frame(os.path.join(args.dataset, "tracks.jsonl"))
        trajectories = _trajectories_from_frames(tracks)
        mined = segmod.baseline_equal_length(
            poses, trajectories, (header.image_width, header.image_height), float(value)
        )
        stats = segmod.compute_stats(
            mined, poses.frames, (header.image_width, header.image_height)
        )
        io.dump_json(os.path.join(args.out, "segments.json"), io.segments_to_json(mined))
        io.dump_json(os.path.join(args.out, "stats.json"), _stats_json(stats, None))
        return 0

    header, graph, trajectories, poses, report, result, mined, discarded = (
        segment_dataset(args.dataset, cfg, args.bias_fraction)
    )
    stats = segmod.compute_stats(
        mined, poses.frames, (header.image_width, header.image_height)
    )

    ari = None
    gt_path = os.path.join(args.dataset, "ground_truth.json")
    if os.path.exists(gt_path):
        truth = {int(t): lab for t, lab in io.load_json(gt_path)["labels"].items()}
        ari = synthworld.planted_ari(mined_grouping(mined, truth), truth)

    io.dump_json(
        os.path.join(args.out, "graph.json"),
        {
            "trajectory_vertices": len(graph.trajectory_vertices),
            "box_vertices": len(graph.box_vertices),
            "edges": len(graph.edges),
            "bias": asdict(report) if report else None,
            "objective": result.objective,
            "components": result.component_count,
        },
    )
    io.dump_json(os.path.join(args.out, "segments.json"), io.segments_to_json(mined))
    io.dump_json(os.path.join(args.out, "stats.json"), _stats_json(stats, ari))
    return 0


def _trajectories_from_frames(tracks_by_frame):
    from .core import PointTrajectory

    samples: Dict[int, list] = {}
    for frame in sorted(tracks_by_frame):
        for tid, x, y in tracks_by_frame[frame]:
            samples.setdefault(tid, []).append((frame, x, y))
    return {tid: PointTrajectory(tid, tuple(s)) for tid, s in samples.items()}


def mined_grouping(mined, truth) -> Dict[int, int]:
    """Trajectory labels for ARI: segment id, or one shared discarded label."""
    grouping = {tid: -1 for tid in truth}
    for seg in mined:
        for tid in seg.trajectory_ids:
            if tid in grouping:
                grouping[tid] = seg.id
    return grouping


def _stats_json(stats: segmod.SegmentStats, ari: Optional[float]) -> dict:
    obj = asdict(stats)
    obj["planted_ari"] = ari
    return obj


# ---------------------------------------------------------------- eval


def _class_spans(mined, poses: PoseLog) -> Dict[int, List[Tuple[float, float]]]:
    if len(poses) > 1:
        steps = [b - a for a, b in zip(poses.s, poses.s[1:]) if b > a]
        max_gap = 5.0 * statistics.median(steps) if steps else 1.0
    else:
        max_gap = 1.0
    return {
        seg.id: mcl.merge_spans(seg.viewpoint_span, max_gap) for seg in mined
    }


def _grid_cells(points, cell: float):
    return frozenset(
        (math.floor(x / cell), math.floor(y / cell)) for x, y in points
    )


def _predicted_token(desc, docs, df, n_docs, codebook) -> Optional[int]:
    scores = placeclass.score_bow(desc, docs, df, n_docs, codebook)
    positive = {c: v for c, v in scores.items() if v > 0}
    if not positive:
        return None
    best = max(positive.values())
    return min(c for c, v in positive.items() if v == best)


def cmd_eval(args) -> int:
    cfg_mining = _mining_config(args)
    header, _, _, poses_m, _, _, mined, _ = segment_dataset(
        args.map, cfg_mining, args.bias_fraction
    )
    if not mined:
        raise DataError(args.map, 0, "no mined segments on the map season")
    poses_q = io.read_poses(os.path.join(args.query, "poses.jsonl"))

    cfg = mcl.MclConfig(
        map_length=poses_m.length,
        d_norm=args.d_norm,
        correct_radius=args.correct_radius,
        nms_radius=args.nms_radius,
        start_spacing=args.start_spacing,
    )
    spans = _class_spans(mined, poses_m)
    cell = cfg_mining.grid_cell_meters
    map_cells = _grid_cells(poses_m.xy, cell)
    seg_cells = frozenset().union(
        *(segmod.segment_cells(seg, poses_m, cell) for seg in mined)
    )

    # per-frame raw scores are run-independent; compute once
    frame_scores: Dict[int, Dict[int, float]] = {}
    token_bits = None
    if args.method == "oracle":
        for frame in poses_q.frames:
            s = poses_q.s_at(frame)
            frame_scores[frame] = {
                seg.id: 1.0
                for seg in mined
                if any(lo <= s <= hi for lo, hi in spans[seg.id])
            }
    else:
        desc_path = os.path.join(args.map, "descriptors.jsonl")
        desc_q_path = os.path.join(args.query, "descriptors.jsonl")
        for p in (desc_path, desc_q_path):
            if not os.path.exists(p):
                raise DataError(p, 0, f"descriptors required for method {args.method}")
        desc_m = io.read_descriptors(desc_path)
        desc_q = io.read_descriptors(desc_q_path)
        dim = next(iter(desc_m.values())).shape[0]
        codebook = placeclass.Codebook.from_seed(CODEBOOK_WORDS, dim, args.seed)
        by_class = {
            seg.id: np.array(
                [desc_m[f] for f in sorted(seg.frame_boxes) if f in desc_m]
            )
            for seg in mined
        }
        by_class = {c: d for c, d in by_class.items() if d.size}
        docs, df = placeclass.build_bow(by_class, codebook)
        n_docs = len(docs)
        if args.method == "bow":
            for frame in poses_q.frames:
                if frame not in desc_q:
                    continue
                frame_scores[frame] = placeclass.score_bow(
                    desc_q[frame], docs, df, n_docs, codebook
                )
        elif args.method == "class-index":
            tokens_by_place: Dict[int, List[Tuple[int, int]]] = {}
            for seg in mined:
                obs = []
                for f in sorted(seg.frame_boxes):
                    if f not in desc_m:
                        continue
                    tok = _predicted_token(desc_m[f], docs, df, n_docs, codebook)
                    if tok is not None:
                        obs.append((f, tok))
                if obs:
                    tokens_by_place[seg.id] = obs
            index = placeclass.build_class_index(tokens_by_place, len(mined))
            token_bits = index.token_bits
            recent: List[int] = []
            for frame in poses_q.frames:
                if frame not in desc_q:
                    continue
                tok = _predicted_token(desc_q[frame], docs, df, n_docs, codebook)
                if tok is not None:
                    recent.append(tok)
                bag = recent[-TOKEN_BAG_WINDOW:]
                if bag:
                    frame_scores[frame] = placeclass.score_class_index(bag, index)
        else:
            raise DataError(args.method, 0, f"unknown method {args.method!r}")

    # multi-start runs: every start separated by start_spacing, goal = map end
    goal_s = poses_q.length
    starts = []
    k = 0
    while k * cfg.start_spacing < goal_s:
        starts.append(k * cfg.start_spacing)
        k += 1
    run_cells = {
        i: _grid_cells(
            [xy for xy, s in zip(poses_q.xy, poses_q.s) if s >= start], cell
        )
        for i, start in enumerate(starts)
    }
    retained = mcl.filter_test_sequences(run_cells, map_cells, seg_cells)

    runs = []
    run_reports = []
    for i in retained:
        start = starts[i]
        particles = mcl.init_particles(cfg)
        prev_s = start
        for frame, s in zip(poses_q.frames, poses_q.s):
            if s < start:
                continue
            mcl.motion_update(particles, s - prev_s)
            prev_s = s
            scores = frame_scores.get(frame)
            if scores:
                mcl.perception_update(particles, scores, spans)
        hyps = mcl.rank_and_nms(particles, cfg.nms_radius)
        truth = min(goal_s, cfg.map_length)
        runs.append((hyps, truth))
        run_reports.append(
            {
                "start": start,
                "truth": truth,
                "hypotheses": [[round(s, 3), round(l, 9)] for s, l in hyps[:200]],
            }
        )
    if not runs:
        raise DataError(args.query, 0, "all test sequences filtered out")

    table = mcl.evaluate_topx(runs, cfg)
    os.makedirs(args.out, exist_ok=True)
    report = {
        "method": args.method,
        "runs": len(runs),
        "starts_total": len(starts),
        "topx": {str(x): table[x] for x in cfg.top_x},
    }
    if token_bits is not None:
        report["token_bits"] = token_bits
        report["class_count"] = len(mined)
    io.dump_json(os.path.join(args.out, "topx.json"), report)
    io.dump_json(os.path.join(args.out, "runs.json"), run_reports)
    return 0


# ---------------------------------------------------------------- metrics


def cmd_metrics(args) -> int:
    seg_a = io.segments_from_json(io.load_json(args.segments_a))
    seg_b = io.segments_from_json(io.load_json(args.segments_b))
    poses_a = io.read_poses(args.poses_a)
    poses_b = io.read_poses(args.poses_b)
    per_query, summary = segmod.jaccard_cross_season(
        seg_a, poses_a, seg_b, poses_b, args.grid_cell
    )
    os.makedirs(args.out, exist_ok=True)
    io.dump_json(
        os.path.join(args.out, "jaccard.json"),
        {
            "per_segment": [
                {"segment": sid, "best_jaccard": round(v, 6), "empty": flag}
                for sid, v, flag in per_query
            ],
            "summary": summary,
        },
    )
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapseg",
        description="Mine minimal map segments and evaluate them with "
        "topometric Monte Carlo localization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-season dataset")
    p.add_argument("--spec", help="world spec JSON (default: built-in world)")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    def add_mining_flags(p):
        p.add_argument("--bias-fraction", type=float, default=0.2)
        p.add_argument("--min-trajectories", type=int, default=5)
        p.add_argument("--min-boxes", type=int, default=1)
        p.add_argument("--bbox-min-pixels", type=int, default=100)

    p = sub.add_parser("segment", help="mine map segments from one season")
    p.add_argument("dataset", help="season directory")
    p.add_argument("--out", required=True)
    add_mining_flags(p)
    p.add_argument("--baseline", help="equal-length=<meters> baseline instead")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="Top-X localization accuracy, map vs query")
    p.add_argument("map", help="map season directory")
    p.add_argument("query", help="query season directory")
    p.add_argument("--method", choices=("bow", "class-index", "oracle"), default="bow")
    p.add_argument("--out", required=True)
    add_mining_flags(p)
    p.add_argument("--nms-radius", type=float, default=10.0)
    p.add_argument("--correct-radius", type=float, default=10.0)
    p.add_argument("--d-norm", type=float, default=1.0)
    p.add_argument("--start-spacing", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0, help="codebook seed")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("metrics", help="cross-season Jaccard over mined segments")
    p.add_argument("segments_a")
    p.add_argument("poses_a")
    p.add_argument("segments_b")
    p.add_argument("poses_b")
    p.add_argument("--grid-cell", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, NotADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
