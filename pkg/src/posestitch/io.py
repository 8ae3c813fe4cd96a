"""Line-delimited JSON schemas for tracklets, tracks, ground truth, and
reports, plus the plain key-value config reader.

Every file starts with a header record naming its schema and version.
Floats are written as decimals with six fractional digits, so writing then
reading is exact for values already at that precision.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import BBox, HypothesisSet, Pose, Track, Tracklet
from .metrics import GroundTruth

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """The file does not follow the expected record schema."""


def _r6(x: float) -> float:
    return round(float(x), 6)


def _joints_out(pose: Pose) -> list:
    return [[_r6(x), _r6(y), _r6(c), int(v)]
            for (x, y), c, v in zip(pose.xy, pose.conf, pose.visible)]


def _pose_record(pose: Pose) -> dict:
    rec = {"frame": int(pose.frame), "joints": _joints_out(pose)}
    if pose.head_size is not None:
        rec["head_size"] = _r6(pose.head_size)
    return rec


def _pose_from(rec: dict, where: str) -> Pose:
    try:
        joints = np.asarray(rec["joints"], dtype=np.float64)
        if joints.ndim != 2 or joints.shape[1] != 4:
            raise SchemaError(f"{where}: joints must be Kx4 arrays")
        return Pose(int(rec["frame"]), joints[:, :2], joints[:, 2],
                    joints[:, 3] > 0.5, rec.get("head_size"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{where}: {exc}") from exc


def _box_out(box: BBox) -> list:
    return [_r6(box.x), _r6(box.y), _r6(box.w), _r6(box.h)]


def _read_records(path, schema: str):
    path = Path(path)
    with path.open() as fh:
        lines = [ln for ln in (l.strip() for l in fh) if ln]
    if not lines:
        raise SchemaError(f"{path}: empty file (missing header)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:1: not JSON: {exc}") from exc
    if header.get("schema") != schema or header.get("version") != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: expected {schema} v{SCHEMA_VERSION} header, got {header}")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            records.append((i, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{i}: not JSON: {exc}") from exc
    return records


def _write_records(path, schema: str, records) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps({"schema": schema, "version": SCHEMA_VERSION}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


# --- tracklets ------------------------------------------------------------

def write_tracklets(path, by_video: dict[str, list[Tracklet]]) -> None:
    records = []
    for video_id in sorted(by_video):
        for t in by_video[video_id]:
            records.append({
                "video_id": video_id,
                "keyframe": int(t.keyframe),
                "clip_len": int(t.clip_len),
                "source_id": t.source_id,
                "box": _box_out(t.box),
                "poses": [_pose_record(p) for p in t.poses],
            })
    _write_records(path, "tracklets", records)


def read_tracklets(path) -> dict[str, list[Tracklet]]:
    out: dict[str, list[Tracklet]] = {}
    for line_no, rec in _read_records(path, "tracklets"):
        where = f"{path}:{line_no} (source_id={rec.get('source_id', '?')})"
        try:
            box = BBox(*map(float, rec["box"]))
            poses = tuple(_pose_from(p, where) for p in rec["poses"])
            t = Tracklet(int(rec["keyframe"]), int(rec["clip_len"]), box,
                         poses, str(rec.get("source_id", "")))
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        out.setdefault(str(rec.get("video_id", "v0")), []).append(t)
    for tracklets in out.values():
        tracklets.sort(key=lambda t: t.keyframe)
    return out


# --- tracks ---------------------------------------------------------------

def write_tracks(path, by_video: dict[str, list[Track]]) -> None:
    records = []
    for video_id in sorted(by_video):
        for tr in sorted(by_video[video_id], key=lambda t: t.track_id):
            rec = {
                "video_id": video_id,
                "track_id": int(tr.track_id),
                "boxes": [[int(kf)] + _box_out(b)
                          for kf, b in sorted(tr.boxes.items())],
                "frames": [],
                "merged": [_pose_record(tr.merged[f])
                           for f in sorted(tr.merged)],
            }
            for f in sorted(tr.frames):
                hs = tr.frames[f]
                rec["frames"].append({
                    "frame": int(f),
                    "capacity": int(hs.capacity),
                    "hypotheses": [dict(_pose_record(p), source=int(src))
                                   for p, src in hs],
                })
            records.append(rec)
    _write_records(path, "tracks", records)


def read_tracks(path) -> dict[str, list[Track]]:
    out: dict[str, list[Track]] = {}
    for line_no, rec in _read_records(path, "tracks"):
        where = f"{path}:{line_no} (track_id={rec.get('track_id', '?')})"
        try:
            track = Track(int(rec["track_id"]))
            for kf, x, y, w, h in rec.get("boxes", []):
                track.boxes[int(kf)] = BBox(float(x), float(y), float(w), float(h))
            for fr in rec["frames"]:
                hs = HypothesisSet(int(fr["frame"]), int(fr["capacity"]))
                for hyp in fr["hypotheses"]:
                    hs.add(_pose_from(hyp, where), int(hyp["source"]))
                track.frames[int(fr["frame"])] = hs
            for p in rec.get("merged", []):
                pose = _pose_from(p, where)
                track.merged[pose.frame] = pose
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        out.setdefault(str(rec.get("video_id", "v0")), []).append(track)
    return out


# --- ground truth ---------------------------------------------------------

def write_gt(path, by_video: dict[str, GroundTruth]) -> None:
    records = []
    for video_id in sorted(by_video):
        gt = by_video[video_id]
        for f in sorted(gt.frames):
            records.append({
                "video_id": video_id,
                "frame": int(f),
                "people": [dict(_pose_record(pose), track_id=int(tid))
                           for tid, pose in gt.frames[f]],
            })
    _write_records(path, "gt", records)


def read_gt(path) -> dict[str, GroundTruth]:
    frames: dict[str, dict[int, list]] = {}
    for line_no, rec in _read_records(path, "gt"):
        where = f"{path}:{line_no} (frame={rec.get('frame', '?')})"
        try:
            f = int(rec["frame"])
            entries = [(int(p["track_id"]), _pose_from(dict(p, frame=f), where))
                       for p in rec["people"]]
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        frames.setdefault(str(rec.get("video_id", "v0")), {})[f] = entries
    return {vid: GroundTruth(fr) for vid, fr in frames.items()}


# --- reports --------------------------------------------------------------

def write_report(path, records: list[dict]) -> None:
    _write_records(path, "report", [_round_tree(r) for r in records])


def read_report(path) -> list[dict]:
    return [rec for _, rec in _read_records(path, "report")]


def _round_tree(obj):
    if isinstance(obj, float):
        return _r6(obj)
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    return obj


# --- key-value config -----------------------------------------------------

def load_config(path) -> dict[str, str]:
    """Parse `key = value` lines; # starts a comment."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{i}: expected key=value, got {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out
