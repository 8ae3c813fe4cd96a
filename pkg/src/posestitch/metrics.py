"""PoseTrack-style evaluation: per-joint AP and MOTA plus the pre-metric
filtering rules.

A predicted joint is correct when its L2 distance to a ground-truth joint
is within half that person's head size. AP ranks all predictions of a joint
by confidence and integrates the precision-recall curve at 101 points; MOTA
counts misses, false positives, and identity switches per joint. Evaluation
per video is independent and parallelizable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import JOINT_NAMES, Pose, Track
from .similarity import pose_bbox

MATCH_RADIUS_SCALE = 0.5
DEFAULT_MIN_TRACK_LEN = 5
DEFAULT_MIN_BOX_AREA = 3200.0
THRESHOLD_GRID = np.round(np.arange(0.0, 1.0, 0.05), 2)


@dataclass(eq=False)
class GroundTruth:
    """Per-frame annotated people: (track_id, Pose with head_size)."""

    frames: dict[int, list[tuple[int, Pose]]] = field(default_factory=dict)

    def __post_init__(self):
        for f, entries in self.frames.items():
            ids = [tid for tid, _ in entries]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate ground-truth ids in frame {f}")
            for tid, pose in entries:
                if pose.head_size is None:
                    raise ValueError(
                        f"ground-truth pose (frame {f}, id {tid}) lacks head_size")

    @property
    def k(self) -> int:
        for entries in self.frames.values():
            for _, pose in entries:
                return pose.k
        raise ValueError("empty ground truth")

    def n_entries(self) -> int:
        return sum(len(v) for v in self.frames.values())


@dataclass(eq=False)
class EvalReport:
    """Per-joint AP (percent) and MOTA (fraction), their means over joints
    with ground truth, and the raw per-joint error counts."""

    ap: np.ndarray
    mota: np.ndarray
    fn: np.ndarray
    fp: np.ndarray
    idsw: np.ndarray
    gt_count: np.ndarray
    joint_names: tuple[str, ...] = JOINT_NAMES

    @property
    def mean_ap(self) -> float:
        valid = ~np.isnan(self.ap)
        return float(self.ap[valid].mean()) if valid.any() else float("nan")

    @property
    def mean_mota(self) -> float:
        valid = ~np.isnan(self.mota)
        return float(self.mota[valid].mean()) if valid.any() else float("nan")

    def to_dict(self) -> dict:
        return {
            "joint_names": list(self.joint_names),
            "ap": [None if np.isnan(v) else float(v) for v in self.ap],
            "mota": [None if np.isnan(v) else float(v) for v in self.mota],
            "fn": self.fn.astype(int).tolist(),
            "fp": self.fp.astype(int).tolist(),
            "idsw": self.idsw.astype(int).tolist(),
            "gt": self.gt_count.astype(int).tolist(),
            "mean_ap": None if np.isnan(self.mean_ap) else self.mean_ap,
            "mean_mota": None if np.isnan(self.mean_mota) else self.mean_mota,
        }

    def table(self) -> str:
        rows = [f"{'joint':<16}{'AP':>8}{'MOTA':>8}{'FN':>7}{'FP':>7}"
                f"{'IDSW':>7}{'GT':>7}"]
        for i, name in enumerate(self.joint_names):
            ap = "-" if np.isnan(self.ap[i]) else f"{self.ap[i]:.1f}"
            mota = "-" if np.isnan(self.mota[i]) else f"{100 * self.mota[i]:.1f}"
            rows.append(f"{name:<16}{ap:>8}{mota:>8}{int(self.fn[i]):>7}"
                        f"{int(self.fp[i]):>7}{int(self.idsw[i]):>7}"
                        f"{int(self.gt_count[i]):>7}")
        rows.append(f"{'mean':<16}{self.mean_ap:>8.1f}{100 * self.mean_mota:>8.1f}")
        return "\n".join(rows)


def frame_predictions(tracks: list[Track]) -> dict[int, list[tuple[int, Pose]]]:
    """Flatten merged track poses into per-frame (track_id, Pose) lists."""
    out: dict[int, list[tuple[int, Pose]]] = {}
    for track in tracks:
        for f, pose in track.merged.items():
            out.setdefault(f, []).append((track.track_id, pose))
    for entries in out.values():
        entries.sort(key=lambda e: e[0])
    return out


def filter_predictions(tracks: list[Track], joint_thresholds,
                       min_len: int = DEFAULT_MIN_TRACK_LEN,
                       min_area: float = DEFAULT_MIN_BOX_AREA) -> list[Track]:
    """Apply the pre-metric cleanup: joints below their confidence threshold
    become invisible, poses whose visible extent is tinier than min_area are
    dropped, and tracks left shorter than min_len frames are removed.

    Idempotent; operates on the merged poses.
    """
    thresholds = np.asarray(joint_thresholds, dtype=np.float64)
    out = []
    for track in tracks:
        merged: dict[int, Pose] = {}
        for f, pose in sorted(track.merged.items()):
            if thresholds.shape != (pose.k,):
                raise ValueError("need one threshold per joint")
            vis = pose.visible & (pose.conf >= thresholds)
            new = Pose(pose.frame, pose.xy, pose.conf, vis, pose.head_size)
            box = pose_bbox(new)
            if box is None or box.area < min_area:
                continue
            merged[f] = new
        if len(merged) < min_len:
            continue
        out.append(Track(track.track_id, dict(track.frames), merged,
                         dict(track.boxes)))
    return out


def match_joints(preds: list[tuple[int, Pose]], gts: list[tuple[int, Pose]],
                 radius_scale: float = MATCH_RADIUS_SCALE,
                 ) -> dict[int, list[tuple[int, int]]]:
    """Greedy distance-ascending one-to-one correspondence for one frame.

    Returns, per joint, (pred index, gt index) pairs whose distance is
    within radius_scale times the ground-truth person's head size.
    """
    if not preds or not gts:
        return {}
    k = preds[0][1].k
    pred_xy = np.stack([p.xy for _, p in preds])          # (P,K,2)
    pred_vis = np.stack([p.visible for _, p in preds])
    gt_xy = np.stack([p.xy for _, p in gts])              # (G,K,2)
    gt_vis = np.stack([p.visible for _, p in gts])
    radius = np.array([radius_scale * p.head_size for _, p in gts])

    d = np.sqrt(((pred_xy[:, None] - gt_xy[None, :]) ** 2).sum(axis=3))
    ok = pred_vis[:, None] & gt_vis[None, :] & (d <= radius[None, :, None])

    out: dict[int, list[tuple[int, int]]] = {}
    for joint in range(k):
        mask = ok[:, :, joint]
        if not mask.any():
            continue
        pi_arr, gi_arr = np.nonzero(mask)
        dist = d[pi_arr, gi_arr, joint]
        order = np.lexsort((gi_arr, pi_arr, dist))
        used_p: set[int] = set()
        used_g: set[int] = set()
        pairs = []
        for idx in order:
            pi, gi = int(pi_arr[idx]), int(gi_arr[idx])
            if pi in used_p or gi in used_g:
                continue
            used_p.add(pi)
            used_g.add(gi)
            pairs.append((pi, gi))
        out[joint] = pairs
    return out


def compute_mota(preds_by_frame: dict[int, list[tuple[int, Pose]]],
                 gt: GroundTruth,
                 radius_scale: float = MATCH_RADIUS_SCALE):
    """Per-joint MOTA = 1 - (FN + FP + IDSW) / GT.

    An identity switch is a matched ground-truth joint whose matched
    prediction track id differs from its previous matched frame. Joints
    that never appear in the ground truth get NaN.

    Returns (mota, fn, fp, idsw, gt_count) arrays of length K.
    """
    k = gt.k
    fn = np.zeros(k, np.int64)
    fp = np.zeros(k, np.int64)
    idsw = np.zeros(k, np.int64)
    gt_count = np.zeros(k, np.int64)
    last_id: dict[tuple[int, int], int] = {}

    for f in sorted(gt.frames):
        gts = gt.frames[f]
        preds = preds_by_frame.get(f, [])
        pairs_by_joint = match_joints(preds, gts, radius_scale)
        for joint in range(k):
            n_gt = sum(1 for _, p in gts if p.visible[joint])
            n_pred = sum(1 for _, p in preds if p.visible[joint])
            pairs = pairs_by_joint.get(joint, [])
            gt_count[joint] += n_gt
            fn[joint] += n_gt - len(pairs)
            fp[joint] += n_pred - len(pairs)
            for pi, gi in pairs:
                pred_tid = preds[pi][0]
                gt_tid = gts[gi][0]
                prev = last_id.get((gt_tid, joint))
                if prev is not None and prev != pred_tid:
                    idsw[joint] += 1
                last_id[(gt_tid, joint)] = pred_tid

    # spurious predictions in frames without any annotation still count as FP
    for f, preds in preds_by_frame.items():
        if f in gt.frames:
            continue
        for _, pose in preds:
            fp += pose.visible.astype(np.int64)

    with np.errstate(invalid="ignore", divide="ignore"):
        mota = 1.0 - (fn + fp + idsw) / gt_count
    mota = np.where(gt_count > 0, mota, np.nan)
    return mota, fn, fp, idsw, gt_count


def compute_ap(preds_by_frame: dict[int, list[tuple[int, Pose]]],
               gt: GroundTruth,
               radius_scale: float = MATCH_RADIUS_SCALE) -> np.ndarray:
    """Per-joint average precision (percent) under 101-point interpolation.

    Predictions of each joint are ranked by confidence over the whole
    dataset; each one greedily claims the nearest unclaimed ground-truth
    joint of its frame within the matching radius.
    """
    k = gt.k
    ap = np.full(k, np.nan)
    frames = sorted(set(gt.frames) | set(preds_by_frame))
    for joint in range(k):
        records = []  # (-conf, order, frame, x, y)
        order = 0
        for f in frames:
            for _, pose in preds_by_frame.get(f, []):
                if pose.visible[joint]:
                    records.append((-float(pose.conf[joint]), order, f,
                                    float(pose.xy[joint, 0]),
                                    float(pose.xy[joint, 1])))
                    order += 1
        records.sort()

        gt_pos: dict[int, list] = {}
        n_gt = 0
        for f, entries in gt.frames.items():
            pts = [(pose.xy[joint], radius_scale * pose.head_size)
                   for _, pose in entries if pose.visible[joint]]
            if pts:
                gt_pos[f] = [np.array([xy for xy, _ in pts]),
                             np.array([r for _, r in pts]),
                             np.zeros(len(pts), bool)]
                n_gt += len(pts)
        if n_gt == 0:
            continue

        tp = np.zeros(len(records), bool)
        for i, (_, _, f, x, y) in enumerate(records):
            slot = gt_pos.get(f)
            if slot is None:
                continue
            xy, r, claimed = slot
            dist = np.hypot(xy[:, 0] - x, xy[:, 1] - y)
            dist = np.where(~claimed & (dist <= r), dist, np.inf)
            best = int(dist.argmin())
            if np.isfinite(dist[best]):
                claimed[best] = True
                tp[i] = True

        if len(records) == 0:
            ap[joint] = 0.0
            continue
        cum_tp = np.cumsum(tp)
        precision = cum_tp / np.arange(1, len(records) + 1)
        recall = cum_tp / n_gt
        ap[joint] = 100.0 * _interpolated_ap(precision, recall)
    return ap


def _interpolated_ap(precision: np.ndarray, recall: np.ndarray) -> float:
    """Mean of the precision envelope at recalls 0.00, 0.01, ..., 1.00."""
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    total = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        mask = recall >= r - 1e-12
        total += float(envelope[mask][0]) if mask.any() else 0.0
    return total / 101.0


def learn_thresholds(tracks: list[Track], gt: GroundTruth,
                     grid=THRESHOLD_GRID,
                     min_len: int = DEFAULT_MIN_TRACK_LEN,
                     min_area: float = DEFAULT_MIN_BOX_AREA) -> np.ndarray:
    """Grid-search the per-joint confidence threshold maximizing that
    joint's MOTA on a hold-out split; ties go to the lowest threshold."""
    k = gt.k
    scores = np.full((len(grid), k), -np.inf)
    for i, theta in enumerate(grid):
        filtered = filter_predictions(tracks, np.full(k, theta), min_len, min_area)
        mota, *_ = compute_mota(frame_predictions(filtered), gt)
        scores[i] = np.where(np.isnan(mota), -np.inf, mota)
    best = scores.argmax(axis=0)  # first max -> lowest threshold
    return np.asarray(grid, dtype=np.float64)[best]


def evaluate(tracks: list[Track], gt: GroundTruth, joint_thresholds=None,
             min_len: int = DEFAULT_MIN_TRACK_LEN,
             min_area: float = DEFAULT_MIN_BOX_AREA) -> EvalReport:
    """Full report: AP on unthresholded predictions, MOTA on thresholded
    ones; the length/area cleanup applies to both."""
    k = gt.k
    if joint_thresholds is None:
        joint_thresholds = np.zeros(k)
    base = filter_predictions(tracks, np.zeros(k), min_len, min_area)
    ap = compute_ap(frame_predictions(base), gt)
    thresholded = filter_predictions(tracks, joint_thresholds, min_len, min_area)
    mota, fn, fp, idsw, gt_count = compute_mota(frame_predictions(thresholded), gt)
    names = JOINT_NAMES if k == len(JOINT_NAMES) else tuple(
        f"joint_{i}" for i in range(k))
    return EvalReport(ap, mota, fn, fp, idsw, gt_count, names)
