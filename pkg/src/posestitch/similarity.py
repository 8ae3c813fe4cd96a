"""Object Keypoint Similarity, tracklet-level similarity, and OKS-based NMS.

OKS between two poses is the mean over jointly visible joints of
exp(-d^2 / (2 s^2 kappa^2)), with s the object scale and kappa a per-joint
falloff constant. Joints invisible in either pose are excluded from the
mean so tube-exit frames cannot poison the similarity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import JOINT_NAMES, BBox, Pose, Track, Tracklet

BBOX_AREA = "bbox_area"
HEAD_SIZE = "head_size"

# Fallback per-joint constants: each joint mapped to the closest COCO
# keypoint's published sigma, doubled (kappa = 2 sigma). Override via
# OksParams / load_kappas.
DEFAULT_KAPPAS = {
    "right_ankle": 0.178, "right_knee": 0.174, "right_hip": 0.214,
    "left_hip": 0.214, "left_knee": 0.174, "left_ankle": 0.178,
    "right_wrist": 0.124, "right_elbow": 0.144, "right_shoulder": 0.158,
    "left_shoulder": 0.158, "left_elbow": 0.144, "left_wrist": 0.124,
    "neck": 0.158, "nose": 0.052, "head_top": 0.070,
}


class NoCommonVisibleJoints(ValueError):
    """The two poses have disjoint visible joint sets."""


@dataclass(frozen=True, eq=False)
class OksParams:
    """Per-joint kappa constants plus the scale convention.

    scale_mode selects what the `scale` argument of :func:`oks` means:
    a detection-box area (s = sqrt(area)) or a head size (s = head size).
    """

    per_joint_kappa: np.ndarray = None
    scale_mode: str = BBOX_AREA

    def __post_init__(self):
        kappas = self.per_joint_kappa
        if kappas is None:
            kappas = np.array([DEFAULT_KAPPAS[n] for n in JOINT_NAMES])
        kappas = np.ascontiguousarray(kappas, dtype=np.float64)
        if kappas.ndim != 1 or (kappas <= 0).any():
            raise ValueError("kappa values must be a 1D array of positives")
        if self.scale_mode not in (BBOX_AREA, HEAD_SIZE):
            raise ValueError(f"unknown scale_mode {self.scale_mode!r}")
        kappas.flags.writeable = False
        object.__setattr__(self, "per_joint_kappa", kappas)

    @property
    def k(self) -> int:
        return self.per_joint_kappa.shape[0]


def load_kappas(path, joint_names=JOINT_NAMES) -> np.ndarray:
    """Read a kappa table from a plain key-value file (name=value or
    whitespace separated, # comments)."""
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                name, val = line.split("=", 1)
            else:
                name, val = line.split(None, 1)
            values[name.strip()] = float(val)
    missing = [n for n in joint_names if n not in values]
    if missing:
        raise ValueError(f"kappa file {path} missing joints: {missing}")
    return np.array([values[n] for n in joint_names])


def _scale_to_s(scale: float, params: OksParams) -> float:
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    return math.sqrt(scale) if params.scale_mode == BBOX_AREA else float(scale)


def oks(a: Pose, b: Pose, scale: float, params: OksParams) -> float:
    """Similarity in [0,1] between two poses at the given object scale.

    Raises NoCommonVisibleJoints when no joint is visible in both.
    """
    if a.k != b.k or a.k != params.k:
        raise ValueError("pose/params joint counts disagree")
    s = _scale_to_s(scale, params)
    val = _kernels.oks_pair(a.xy, a.visible, b.xy, b.visible, s,
                            params.per_joint_kappa)
    if val < 0:
        raise NoCommonVisibleJoints(
            f"poses at frames {a.frame}/{b.frame} share no visible joint")
    return float(val)


def pose_bbox(pose: Pose) -> BBox | None:
    """Tight box around the visible joints; None when nothing is visible.

    Degenerate extents are padded to one pixel so the box stays valid.
    """
    if not pose.visible.any():
        return None
    pts = pose.xy[pose.visible]
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    w = max(float(x1 - x0), 1.0)
    h = max(float(y1 - y0), 1.0)
    return BBox(float(x0), float(y0), w, h)


def _frame_scale(pose_a: Pose, box_a: BBox | None,
                 pose_b: Pose, box_b: BBox | None,
                 params: OksParams) -> float:
    """Symmetric per-pair scale: mean of the two sides' areas or head sizes."""
    if params.scale_mode == BBOX_AREA:
        if box_a is None or box_b is None:
            raise ValueError("bbox_area scale mode needs a detection box per side")
        return 0.5 * (box_a.area + box_b.area)
    for p in (pose_a, pose_b):
        if p.head_size is None:
            raise ValueError("head_size scale mode needs head_size on both poses")
    return 0.5 * (pose_a.head_size + pose_b.head_size)


def tracklet_similarity(a: Tracklet | Track, b: Tracklet,
                        params: OksParams) -> float | None:
    """Average per-frame OKS over all frames both sides cover.

    Returns None (no overlap) when the frame ranges are disjoint, or when
    every overlapping frame lacks jointly visible joints. For a Track the
    per-frame representative is the hypothesis from the most recent source
    keyframe, scaled by that source's detection box.
    """
    if isinstance(a, Track):
        def side_a(frame):
            pose, src = a.frames[frame].latest()
            return pose, a.boxes.get(src)
        common = [f for f in b.frame_range if f in a.frames]
    else:
        def side_a(frame):
            return a.pose_at(frame), a.box
        common = [f for f in b.frame_range if f in a.frame_range]
    if not common:
        return None

    sides = [side_a(f) for f in common]
    poses_b = [b.pose_at(f) for f in common]
    if sides[0][0].k != params.k or poses_b[0].k != params.k:
        raise ValueError("pose/params joint counts disagree")
    s = np.empty(len(common))
    for i, ((pose_a, box_a), pose_b) in enumerate(zip(sides, poses_b)):
        scale = _frame_scale(pose_a, box_a, pose_b, b.box, params)
        s[i] = _scale_to_s(scale, params)
    val = _kernels.oks_frames_mean(
        np.stack([p.xy for p, _ in sides]),
        np.stack([p.visible for p, _ in sides]),
        np.stack([p.xy for p in poses_b]),
        np.stack([p.visible for p in poses_b]),
        s, params.per_joint_kappa)
    if val < 0:
        return None
    return float(val)


def oks_nms(poses: list[Pose], threshold: float, scales,
            params: OksParams) -> list[Pose]:
    """Greedy NMS over same-frame poses.

    Candidates are visited in descending mean-visible-joint confidence; one
    is kept iff its OKS with every already-kept pose stays below the
    threshold, judged at the kept pose's scale. Output order = kept order.
    """
    if not poses:
        raise ValueError("poses must be nonempty")
    frames = {p.frame for p in poses}
    if len(frames) > 1:
        raise ValueError(f"poses span several frames: {sorted(frames)}")
    scales = np.asarray(scales, dtype=np.float64)
    if scales.shape != (len(poses),):
        raise ValueError("need one scale per pose")

    mean_conf = np.array(
        [p.conf[p.visible].mean() if p.visible.any() else 0.0 for p in poses])
    order = np.argsort(-mean_conf, kind="stable")

    kept: list[int] = []
    for i in order:
        suppressed = False
        for j in kept:
            try:
                sim = oks(poses[j], poses[i], float(scales[j]), params)
            except NoCommonVisibleJoints:
                continue
            if sim >= threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(int(i))
    return [poses[i] for i in kept]
