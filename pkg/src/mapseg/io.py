"""Line-delimited JSON dataset files and report serialization.

One JSON object per line for tracks/boxes/poses/descriptors, streamable and
diffable; reports are single JSON documents with sorted keys so reruns are
byte-identical.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Dict, Iterator, List, Tuple

import numpy as np

from .core import MapSegment, ObjectBox, PoseLog


class DataError(Exception):
    """Malformed input data; carries file and line for the CLI report."""

    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class DatasetHeader:
    image_width: float
    image_height: float
    frame_count: int
    map_length: float
    season: str

    def __post_init__(self) -> None:
        if self.image_width <= 0 or self.image_height <= 0 or self.map_length <= 0:
            raise ValueError("header dimensions must be positive")


def dump_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _iter_jsonl(path: str) -> Iterator[Tuple[int, dict]]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(path, lineno, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataError(path, lineno, "record is not an object")
            yield lineno, obj


def _require(obj: dict, keys, path: str, lineno: int) -> None:
    for key in keys:
        if key not in obj:
            raise DataError(path, lineno, f"missing field {key!r}")


def write_header(directory: str, header: DatasetHeader) -> None:
    dump_json(os.path.join(directory, "header.json"), asdict(header))


def read_header(directory: str) -> DatasetHeader:
    path = os.path.join(directory, "header.json")
    obj = load_json(path)
    try:
        return DatasetHeader(**obj)
    except (TypeError, ValueError) as exc:
        raise DataError(path, 1, str(exc)) from exc


def write_tracks(path: str, records) -> None:
    """records: iterable of (frame, trajectory id, x, y) in frame order."""
    with open(path, "w") as fh:
        for frame, tid, x, y in records:
            fh.write(
                json.dumps(
                    {"id": tid, "frame": frame, "x": round(x, 3), "y": round(y, 3)},
                    sort_keys=True,
                )
                + "\n"
            )


def read_tracks_by_frame(path: str) -> Dict[int, List[Tuple[int, float, float]]]:
    """Frame -> list of (trajectory id, x, y); frames must arrive in order."""
    frames: Dict[int, List[Tuple[int, float, float]]] = {}
    last = -1
    for lineno, obj in _iter_jsonl(path):
        _require(obj, ("id", "frame", "x", "y"), path, lineno)
        frame = obj["frame"]
        if frame < last:
            raise DataError(path, lineno, f"frame {frame} out of order")
        last = frame
        frames.setdefault(frame, []).append((obj["id"], obj["x"], obj["y"]))
    return frames


def write_boxes(path: str, records) -> None:
    with open(path, "w") as fh:
        for bid, frame, x0, y0, x1, y1 in records:
            fh.write(
                json.dumps(
                    {
                        "id": bid,
                        "frame": frame,
                        "x_min": round(x0, 3),
                        "y_min": round(y0, 3),
                        "x_max": round(x1, 3),
                        "y_max": round(y1, 3),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_boxes_by_frame(path: str) -> Dict[int, List[ObjectBox]]:
    frames: Dict[int, List[ObjectBox]] = {}
    for lineno, obj in _iter_jsonl(path):
        _require(obj, ("id", "frame", "x_min", "y_min", "x_max", "y_max"), path, lineno)
        try:
            box = ObjectBox(
                id=obj["id"],
                frame=obj["frame"],
                x_min=obj["x_min"],
                y_min=obj["y_min"],
                x_max=obj["x_max"],
                y_max=obj["y_max"],
            )
        except ValueError as exc:
            raise DataError(path, lineno, str(exc)) from exc
        frames.setdefault(box.frame, []).append(box)
    return frames


def write_poses(path: str, records) -> None:
    with open(path, "w") as fh:
        for frame, s, x, y in records:
            fh.write(
                json.dumps(
                    {
                        "frame": frame,
                        "s": round(s, 6),
                        "x": round(x, 6),
                        "y": round(y, 6),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_poses(path: str) -> PoseLog:
    records = []
    for lineno, obj in _iter_jsonl(path):
        _require(obj, ("frame", "s", "x", "y"), path, lineno)
        records.append((obj["frame"], obj["s"], obj["x"], obj["y"]))
    try:
        return PoseLog(records)
    except ValueError as exc:
        raise DataError(path, 0, str(exc)) from exc


def write_descriptors(path: str, descriptors: Dict[int, np.ndarray]) -> None:
    with open(path, "w") as fh:
        for frame in sorted(descriptors):
            vec = [round(float(v), 6) for v in descriptors[frame]]
            fh.write(json.dumps({"frame": frame, "vec": vec}, sort_keys=True) + "\n")


def read_descriptors(path: str) -> Dict[int, np.ndarray]:
    out: Dict[int, np.ndarray] = {}
    for lineno, obj in _iter_jsonl(path):
        _require(obj, ("frame", "vec"), path, lineno)
        out[obj["frame"]] = np.asarray(obj["vec"], dtype=np.float64)
    return out


def segments_to_json(segments) -> list:
    from .core import box_id_of

    return [
        {
            "id": seg.id,
            "trajectory_ids": sorted(seg.trajectory_ids),
            "box_ids": sorted(box_id_of(b) for b in seg.box_ids),
            "frame_boxes": {
                str(f): [round(v, 3) for v in bb]
                for f, bb in sorted(seg.frame_boxes.items())
            },
            "viewpoint_span": sorted(round(s, 6) for s in seg.viewpoint_span),
        }
        for seg in segments
    ]


def segments_from_json(obj) -> List[MapSegment]:
    from .core import box_vertex

    return [
        MapSegment(
            id=rec["id"],
            trajectory_ids=frozenset(rec["trajectory_ids"]),
            box_ids=frozenset(box_vertex(b) for b in rec["box_ids"]),
            frame_boxes={
                int(f): tuple(bb) for f, bb in rec["frame_boxes"].items()
            },
            viewpoint_span=frozenset(rec["viewpoint_span"]),
        )
        for rec in obj
    ]
