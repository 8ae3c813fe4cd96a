"""Stitch the per-keyframe tracklet stream into identity-consistent tracks.

Keyframes are processed in ascending order. At each one a cost matrix of
negative tracklet similarities is built between the active tracks and the
incoming tracklets, solved exactly, and matched tracklets contribute their
poses as new hypotheses (one per source keyframe per frame). Unmatched
tracklets spawn new identities; a track that has gone more than clip_len
frames without a match can no longer overlap anything and is frozen.

Stitching is sequential over keyframes within one video; distinct videos
may be processed fully in parallel.
"""

from __future__ import annotations

import numpy as np

from .assignment import GATED, greedy_match, hungarian_solve
from .core import (ClipConfig, HypothesisSet, Pose, ScheduleViolation, Track,
                   Tracklet, hypothesis_capacity, keyframe_schedule)
from .similarity import OksParams, oks, pose_bbox, tracklet_similarity

DEFAULT_GATE = 0.3


def _coverage_capacity(schedule: list[int], video_len: int, delta: int) -> int:
    """Exact maximum number of clip windows covering any single frame."""
    counts = np.zeros(video_len, np.int64)
    for t in schedule:
        counts[max(0, t - delta):min(video_len, t + delta + 1)] += 1
    return int(counts.max())


def stitch(tracklets: list[Tracklet], cfg: ClipConfig, params: OksParams,
           gate: float = DEFAULT_GATE,
           video_len: int | None = None) -> list[Track]:
    """Merge overlapping tracklets into tracks carrying full hypothesis sets.

    Every input pose ends up in exactly one track. Raises ScheduleViolation
    when a tracklet's keyframe is off the keyframe schedule.
    """
    if not tracklets:
        return []
    if video_len is None:
        video_len = max(t.poses[-1].frame for t in tracklets) + 1
    schedule = keyframe_schedule(video_len, cfg)
    allowed = set(schedule)
    capacity = max(hypothesis_capacity(cfg),
                   _coverage_capacity(schedule, video_len, cfg.delta))

    by_keyframe: dict[int, list[Tracklet]] = {}
    for t in tracklets:
        if t.keyframe not in allowed:
            raise ScheduleViolation(
                f"keyframe {t.keyframe} not on the schedule for "
                f"video_len={video_len}, clip_len={cfg.clip_len}, step={cfg.step}")
        by_keyframe.setdefault(t.keyframe, []).append(t)

    tracks: list[Track] = []
    active: list[list] = []  # [track, last matched keyframe]
    next_id = 0

    for kf in sorted(by_keyframe):
        active = [e for e in active if kf - e[1] <= cfg.clip_len]
        incoming = by_keyframe[kf]

        pairs = []
        if active:
            cost = np.full((len(active), len(incoming)), GATED)
            for i, (track, _) in enumerate(active):
                for j, tl in enumerate(incoming):
                    sim = tracklet_similarity(track, tl, params)
                    if sim is not None and sim >= gate:
                        cost[i, j] = -sim
            pairs, _ = hungarian_solve(cost)

        matched_cols = set()
        for i, j in pairs:
            _append(active[i][0], incoming[j], kf, capacity)
            active[i][1] = kf
            matched_cols.add(j)
        for j, tl in enumerate(incoming):
            if j in matched_cols:
                continue
            track = Track(next_id)
            next_id += 1
            _append(track, tl, kf, capacity)
            tracks.append(track)
            active.append([track, kf])

    return tracks


def _append(track: Track, tl: Tracklet, keyframe: int, capacity: int) -> None:
    for pose in tl.poses:
        hs = track.frames.get(pose.frame)
        if hs is None:
            hs = HypothesisSet(pose.frame, capacity)
            track.frames[pose.frame] = hs
        hs.add(pose, keyframe)
    track.boxes[keyframe] = tl.box


def link_framewise(per_frame_poses: list[list[Pose]], params: OksParams,
                   gate: float = DEFAULT_GATE) -> list[Track]:
    """Greedy frame-to-frame pose linking (the oks-gbm ablation baseline).

    per_frame_poses[f] holds frame f's detections. Consecutive frames are
    associated by greedy bipartite matching on pose OKS; there is no
    mechanism to bridge a missed frame, so gaps split tracks.
    """
    tracks: list[Track] = []
    prev: list[tuple[Track, Pose]] = []
    next_id = 0

    for f, poses in enumerate(per_frame_poses):
        for pose in poses:
            if pose.frame != f:
                raise ValueError(f"pose at index {f} carries frame {pose.frame}")
        links: dict[int, Track] = {}
        if prev and poses:
            cost = np.full((len(prev), len(poses)), GATED)
            for i, (_, ppose) in enumerate(prev):
                for j, pose in enumerate(poses):
                    box_p = pose_bbox(ppose)
                    box_c = pose_bbox(pose)
                    if box_p is None or box_c is None:
                        continue
                    scale = 0.5 * (box_p.area + box_c.area)
                    try:
                        sim = oks(ppose, pose, scale, params)
                    except ValueError:
                        continue
                    if sim >= gate:
                        cost[i, j] = -sim
            for i, j in greedy_match(cost):
                links[j] = prev[i][0]

        cur: list[tuple[Track, Pose]] = []
        for j, pose in enumerate(poses):
            track = links.get(j)
            if track is None:
                track = Track(next_id)
                next_id += 1
                tracks.append(track)
            hs = HypothesisSet(f, 1)
            hs.add(pose, f)
            track.frames[f] = hs
            box = pose_bbox(pose)
            if box is not None:
                track.boxes[f] = box
            cur.append((track, pose))
        prev = cur

    return tracks
