"""Synthetic scenarios with known ground truth.

People follow smooth sinusoid-plus-drift trajectories with a rigid 15-joint
skeleton, so coverage probabilities have closed forms and recovered poses
can be checked against exact positions. Detector misses, Gaussian joint
noise, and entanglement corruption (a contiguous sub-window of a tracklet
taking a neighbour's joints at full self-confidence) model the failure
modes the pipeline is supposed to absorb.

Generation is pure given the seed; scenarios parallelize freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (ClipConfig, Pose, Track, Tracklet, enlarge_bbox,
                   keyframe_schedule)
from .metrics import GroundTruth
from .similarity import pose_bbox

# Rigid skeleton offsets in head-size units, JOINT_NAMES order, y down.
SKELETON = np.array([
    (-0.50, 2.8), (-0.45, 1.7), (-0.40, 0.6),   # right leg
    (0.40, 0.6), (0.45, 1.7), (0.50, 2.8),      # left leg
    (-0.95, 0.7), (-0.85, -0.1), (-0.65, -0.9),  # right arm
    (0.65, -0.9), (0.85, -0.1), (0.95, 0.7),    # left arm
    (0.0, -1.0), (0.0, -1.5), (0.0, -2.0),      # neck, nose, head top
])


@dataclass(frozen=True)
class Scenario:
    """Ground-truth motion plus simulated detector/estimator noise knobs."""

    n_people: int = 2
    video_len: int = 50
    head_size: float = 25.0
    spacing: float = 80.0
    amplitude_range: tuple[float, float] = (4.0, 12.0)
    period_range: tuple[float, float] = (20.0, 60.0)
    speed_range: tuple[float, float] = (0.2, 1.0)
    miss_rate: float = 0.0
    pose_noise: float = 0.0
    swap_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_people < 1 or self.video_len < 1:
            raise ValueError("need at least one person and one frame")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError("miss_rate outside [0,1]")
        if not 0.0 <= self.swap_rate <= 1.0:
            raise ValueError("swap_rate outside [0,1]")
        if self.pose_noise < 0:
            raise ValueError("pose_noise must be >= 0")
        if self.head_size <= 0:
            raise ValueError("head_size must be > 0")


@dataclass(eq=False)
class GenerateInfo:
    """Provenance of the simulated failures, for oracle-style tests."""

    emitted: set = field(default_factory=set)        # (person, keyframe)
    corrupted: dict = field(default_factory=dict)    # (person, keyframe) -> (lo, hi, neighbor)
    centers: np.ndarray | None = None                # (n_people, video_len, 2)

    def corrupted_at(self, person: int, frame: int) -> int:
        """Number of this person's tracklets whose swap window covers frame."""
        return sum(1 for (p, _), (lo, hi, _) in self.corrupted.items()
                   if p == person and lo <= frame <= hi)

    def emitted_covering(self, person: int, frame: int, cfg: ClipConfig) -> int:
        return sum(1 for (p, kf) in self.emitted
                   if p == person and abs(kf - frame) <= cfg.delta)


def _trajectories(s: Scenario, rng: np.random.Generator) -> np.ndarray:
    """(n_people, video_len, 2) smooth center positions."""
    t = np.arange(s.video_len, dtype=np.float64)
    centers = np.empty((s.n_people, s.video_len, 2))
    for j in range(s.n_people):
        start = np.array([200.0 + s.spacing * j, 300.0 + 0.5 * s.spacing * (j % 2)])
        angle = rng.uniform(0.0, 2.0 * np.pi)
        speed = rng.uniform(*s.speed_range)
        vel = speed * np.array([np.cos(angle), np.sin(angle)])
        amp = rng.uniform(*s.amplitude_range, size=2)
        period = rng.uniform(*s.period_range)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
        wave = amp * np.sin(2.0 * np.pi * t[:, None] / period + phase)
        centers[j] = start + t[:, None] * vel + wave
    return centers


def _gt_pose(centers: np.ndarray, person: int, frame: int,
             s: Scenario) -> Pose:
    xy = centers[person, frame] + SKELETON * s.head_size
    k = SKELETON.shape[0]
    return Pose(frame, xy, np.ones(k), np.ones(k, bool), s.head_size)


def generate(s: Scenario, cfg: ClipConfig = ClipConfig()
             ) -> tuple[GroundTruth, list[Tracklet]]:
    gt, tracklets, _ = generate_with_info(s, cfg)
    return gt, tracklets


def generate_with_info(s: Scenario, cfg: ClipConfig = ClipConfig()
                       ) -> tuple[GroundTruth, list[Tracklet], GenerateInfo]:
    """Ground truth plus simulated tracklets plus failure provenance.

    Per keyframe and person, a tracklet is emitted with probability
    1 - miss_rate: its box is the ground-truth pose extent enlarged by 25%,
    its poses are the windowed ground truth plus isotropic Gaussian noise,
    and per-joint confidences decrease with the drawn noise magnitude. With
    probability swap_rate a contiguous minority sub-window of the tracklet
    takes the nearest neighbour's joints instead (still at self-confidence,
    mimicking a confidently entangled estimate).
    """
    rng = np.random.default_rng(s.seed)
    centers = _trajectories(s, rng)
    k = SKELETON.shape[0]

    frames = {}
    for f in range(s.video_len):
        frames[f] = [(j, _gt_pose(centers, j, f, s)) for j in range(s.n_people)]
    gt = GroundTruth(frames)

    info = GenerateInfo(centers=centers)
    tracklets: list[Tracklet] = []
    sigma = s.pose_noise
    for kf in keyframe_schedule(s.video_len, cfg):
        lo = max(0, kf - cfg.delta)
        hi = min(s.video_len - 1, kf + cfg.delta)
        window = range(lo, hi + 1)
        for j in range(s.n_people):
            if rng.random() < s.miss_rate:
                continue
            info.emitted.add((j, kf))

            base = centers[j, lo:hi + 1]  # (F, 2)
            source = np.repeat(j, len(window))
            if s.n_people >= 2 and rng.random() < s.swap_rate:
                dists = np.linalg.norm(centers[:, kf] - centers[j, kf], axis=1)
                dists[j] = np.inf
                neighbor = int(dists.argmin())
                max_len = max(1, len(window) // 2)
                length = int(rng.integers(1, max_len + 1))
                start = int(rng.integers(0, len(window) - length + 1))
                source[start:start + length] = neighbor
                info.corrupted[(j, kf)] = (lo + start, lo + start + length - 1,
                                           neighbor)
                base = centers[source, np.arange(lo, hi + 1)]

            noise = rng.normal(0.0, 1.0, size=(len(window), k, 2)) * sigma
            poses = []
            for fi, f in enumerate(window):
                xy = base[fi] + SKELETON * s.head_size + noise[fi]
                r2 = (noise[fi] ** 2).sum(axis=1)
                if sigma > 0:
                    conf = np.exp(-r2 / (2.0 * sigma * sigma))
                else:
                    conf = np.ones(k)
                poses.append(Pose(f, xy, conf, np.ones(k, bool)))

            box = enlarge_bbox(pose_bbox(_gt_pose(centers, j, kf, s)), 0.25)
            tracklets.append(Tracklet(kf, cfg.clip_len, box, tuple(poses),
                                      source_id=f"p{j}.k{kf}"))
    return gt, tracklets, info


def recovery_rate(gt: GroundTruth, tracks: list[Track],
                  radius_scale: float = 0.5) -> float:
    """Fraction of ground-truth (person, frame) entries for which some track
    holds at least one hypothesis within the matching radius (mean visible
    joint distance <= radius_scale * head size)."""
    by_frame: dict[int, list[Pose]] = {}
    for track in tracks:
        for f, hs in track.frames.items():
            for pose, _ in hs:
                by_frame.setdefault(f, []).append(pose)

    total = 0
    hit = 0
    for f, entries in gt.frames.items():
        candidates = by_frame.get(f, [])
        for _, gpose in entries:
            total += 1
            radius = radius_scale * gpose.head_size
            for pose in candidates:
                common = pose.visible & gpose.visible
                if not common.any():
                    continue
                d = np.linalg.norm(pose.xy[common] - gpose.xy[common], axis=1)
                if d.mean() <= radius:
                    hit += 1
                    break
    if total == 0:
        raise ValueError("empty ground truth")
    return hit / total
