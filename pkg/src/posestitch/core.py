"""Shared domain types plus keyframe/tube scheduling geometry.

Coordinates are continuous (sub-pixel) floats, frame indices are integers.
All types are immutable values after construction; the operations are pure
functions, so everything here is safe to use from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

K_DEFAULT = 15

# PoseTrack-style 15-joint skeleton order.
JOINT_NAMES = (
    "right_ankle", "right_knee", "right_hip",
    "left_hip", "left_knee", "left_ankle",
    "right_wrist", "right_elbow", "right_shoulder",
    "left_shoulder", "left_elbow", "left_wrist",
    "neck", "nose", "head_top",
)


class ScheduleViolation(ValueError):
    """A tracklet's keyframe or window contradicts the clip schedule."""


@dataclass(frozen=True)
class Joint:
    """One body joint: position, confidence in [0,1], visibility flag.

    Invisible joints carry no position semantics and are excluded from all
    distance computations.
    """

    x: float
    y: float
    confidence: float
    visible: bool = True

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")


@dataclass(frozen=True, eq=False)
class Pose:
    """One person's joints in one frame, stored as arrays of length K.

    xy is (K,2) float64; invisible joints are normalized to position (0,0)
    and confidence 0 so serialization stays exact.
    """

    frame: int
    xy: np.ndarray
    conf: np.ndarray
    visible: np.ndarray
    head_size: float | None = None

    def __post_init__(self):
        xy = np.ascontiguousarray(self.xy, dtype=np.float64)
        conf = np.ascontiguousarray(self.conf, dtype=np.float64)
        visible = np.ascontiguousarray(self.visible, dtype=bool)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise ValueError(f"xy must be (K,2), got {xy.shape}")
        k = xy.shape[0]
        if conf.shape != (k,) or visible.shape != (k,):
            raise ValueError("conf/visible must be length K")
        if self.frame < 0:
            raise ValueError(f"frame {self.frame} < 0")
        if ((conf < 0) | (conf > 1)).any():
            raise ValueError("confidence outside [0,1]")
        if self.head_size is not None and self.head_size <= 0:
            raise ValueError("head_size must be > 0")
        if not visible.all():
            xy = xy.copy()
            conf = conf.copy()
            xy[~visible] = 0.0
            conf[~visible] = 0.0
        for arr in (xy, conf, visible):
            arr.flags.writeable = False
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "conf", conf)
        object.__setattr__(self, "visible", visible)

    @property
    def k(self) -> int:
        return self.xy.shape[0]

    def joint(self, i: int) -> Joint:
        return Joint(float(self.xy[i, 0]), float(self.xy[i, 1]),
                     float(self.conf[i]), bool(self.visible[i]))

    @classmethod
    def from_joints(cls, frame: int, joints: list[Joint],
                    head_size: float | None = None) -> "Pose":
        xy = np.array([[j.x, j.y] for j in joints], dtype=np.float64)
        conf = np.array([j.confidence for j in joints], dtype=np.float64)
        vis = np.array([j.visible for j in joints], dtype=bool)
        return cls(frame, xy, conf, vis, head_size)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus strictly positive extent."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"degenerate box {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.w, self.h))

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class ClipConfig:
    """Clip length |C| (odd) and keyframe stepsize S, S <= |C|."""

    clip_len: int = 9
    step: int = 1

    def __post_init__(self):
        if self.clip_len < 1 or self.clip_len % 2 == 0:
            raise ValueError(f"clip_len must be odd and >= 1, got {self.clip_len}")
        if not 1 <= self.step <= self.clip_len:
            raise ValueError(f"step must be in [1, clip_len], got {self.step}")

    @property
    def delta(self) -> int:
        return (self.clip_len - 1) // 2


@dataclass(frozen=True, eq=False)
class Tracklet:
    """Fixed-length pose sequence from one keyframe detection.

    poses cover consecutive frames containing the keyframe; boundary clips
    are truncated to valid frames, so len(poses) <= clip_len with equality
    away from video edges. box is the keyframe detection, pre-enlargement.
    """

    keyframe: int
    clip_len: int
    box: BBox
    poses: tuple[Pose, ...]
    source_id: str = ""

    def __post_init__(self):
        if self.clip_len < 1 or self.clip_len % 2 == 0:
            raise ValueError("clip_len must be odd and >= 1")
        poses = tuple(self.poses)
        if not poses or len(poses) > self.clip_len:
            raise ValueError(f"{len(poses)} poses for clip_len {self.clip_len}")
        frames = [p.frame for p in poses]
        if frames != list(range(frames[0], frames[0] + len(frames))):
            raise ValueError("pose frames must be consecutive")
        delta = (self.clip_len - 1) // 2
        if not frames[0] <= self.keyframe <= frames[-1]:
            raise ValueError("keyframe outside pose window")
        if frames[0] < self.keyframe - delta or frames[-1] > self.keyframe + delta:
            raise ValueError("pose window wider than the clip allows")
        object.__setattr__(self, "poses", poses)

    @property
    def frame_range(self) -> range:
        return range(self.poses[0].frame, self.poses[-1].frame + 1)

    def pose_at(self, frame: int) -> Pose:
        return self.poses[frame - self.poses[0].frame]


class HypothesisSet:
    """The pose estimates for one person at one frame, one per covering
    keyframe, capped at the schedule-determined capacity."""

    __slots__ = ("frame", "capacity", "hypotheses")

    def __init__(self, frame: int, capacity: int):
        self.frame = frame
        self.capacity = capacity
        self.hypotheses: list[tuple[Pose, int]] = []

    def add(self, pose: Pose, source_keyframe: int) -> None:
        if pose.frame != self.frame:
            raise ValueError(f"pose frame {pose.frame} != set frame {self.frame}")
        if any(src == source_keyframe for _, src in self.hypotheses):
            raise ScheduleViolation(
                f"duplicate hypothesis from keyframe {source_keyframe} "
                f"at frame {self.frame}")
        if len(self.hypotheses) >= self.capacity:
            raise ScheduleViolation(
                f"hypothesis capacity {self.capacity} exceeded at frame {self.frame}")
        self.hypotheses.append((pose, source_keyframe))

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)

    def latest(self) -> tuple[Pose, int]:
        """Hypothesis from the most recent source keyframe."""
        return max(self.hypotheses, key=lambda h: h[1])


@dataclass(eq=False)
class Track:
    """Arbitrary-length identity: per-frame hypothesis sets plus, after the
    merge stage, one final pose per frame. boxes maps each contributing
    source keyframe to its detection box."""

    track_id: int
    frames: dict[int, HypothesisSet] = field(default_factory=dict)
    merged: dict[int, Pose] = field(default_factory=dict)
    boxes: dict[int, BBox] = field(default_factory=dict)

    @property
    def frame_range(self) -> range:
        lo = min(self.frames)
        return range(lo, max(self.frames) + 1)

    def n_hypotheses(self) -> int:
        return sum(len(h) for h in self.frames.values())


def enlarge_bbox(box: BBox, factor: float) -> BBox:
    """Grow a box about its center by `factor` along both dimensions."""
    if factor < 0:
        raise ValueError(f"factor must be >= 0, got {factor}")
    w = box.w * (1.0 + factor)
    h = box.h * (1.0 + factor)
    cx, cy = box.center
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def keyframe_schedule(video_len: int, cfg: ClipConfig) -> list[int]:
    """Keyframes 0, S, 2S, ... covering every frame of the video.

    Windows at video boundaries are truncated, never shifted. When the
    stepping alone leaves a tail frame uncovered (step > delta at the end of
    the video) the last frame is appended as a final keyframe.
    """
    if video_len < 1:
        raise ValueError(f"video_len must be >= 1, got {video_len}")
    ks = list(range(0, video_len, cfg.step))
    if ks[-1] + cfg.delta < video_len - 1:
        ks.append(video_len - 1)
    return ks


def hypothesis_capacity(cfg: ClipConfig) -> int:
    """Maximum number of keyframes whose clip window covers one frame."""
    return (cfg.clip_len - 1) // cfg.step + 1
