"""Reduce per-frame hypothesis sets to one final pose per frame.

Two strategies: a per-joint argmax-confidence baseline, and the
spatial-temporal merge that clusters joint hypotheses per frame with
flat-kernel mean shift and then picks one cluster per frame along the
cheapest path of a layered graph. Edges between clusters in consecutive
(nonempty) layers cost

    (H - |a|) + (H - |b|) + lam * ||center_a - center_b||^2

so paths prefer clusters backed by many hypotheses and smooth motion.
Per-(track, joint) merges are independent and may run in parallel.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import HypothesisSet, Pose, Track


class EmptyHypotheses(ValueError):
    """A track frame carries no hypotheses (stitcher contract violation)."""


@dataclass(frozen=True, eq=False)
class JointCluster:
    """One mean-shift cluster of a joint's hypotheses in one frame."""

    center: np.ndarray
    points: np.ndarray
    conf: np.ndarray
    frame: int = -1
    joint_id: int = -1

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        points = np.asarray(self.points, dtype=np.float64)
        conf = np.asarray(self.conf, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < 1:
            raise ValueError("cluster needs at least one member")
        if conf.shape[0] != points.shape[0]:
            raise ValueError("conf/points length mismatch")
        if np.abs(points.mean(axis=0) - center).max() > 1e-6:
            raise ValueError("center must be the member mean")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "conf", conf)

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class MergeConfig:
    """Spatial/temporal balance and clustering radius.

    Bandwidth per frame is radius_scale times the head-size estimate; when
    no head size is attached to the hypotheses, fallback_radius (if set) is
    used directly, otherwise 25% of the nearest contributing detection
    box's diagonal stands in for the head size.
    """

    lam: float = 0.1
    radius_scale: float = 0.5
    fallback_radius: float | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.radius_scale <= 0:
            raise ValueError("radius_scale must be > 0")
        if self.fallback_radius is not None and self.fallback_radius <= 0:
            raise ValueError("fallback_radius must be > 0")


MERGE_MODES = ("baseline", "spatial", "temporal", "full")


def baseline_merge(h: HypothesisSet) -> Pose:
    """Per joint, the position/confidence of the most confident hypothesis;
    ties go to the earliest source keyframe."""
    if len(h) == 0:
        raise EmptyHypotheses(f"no hypotheses at frame {h.frame}")
    by_source = sorted(h, key=lambda item: item[1])
    k = by_source[0][0].k
    xy = np.zeros((k, 2))
    conf = np.zeros(k)
    vis = np.zeros(k, bool)
    for pose, _ in by_source:
        better = pose.visible & (~vis | (pose.conf > conf))
        xy[better] = pose.xy[better]
        conf[better] = pose.conf[better]
        vis[better] = True
    return Pose(h.frame, xy, conf, vis)


def mean_shift(points, bandwidth: float, conf=None,
               frame: int = -1, joint_id: int = -1) -> list[JointCluster]:
    """Flat-kernel mean shift over 2D points.

    Each point's mode estimate is iterated to convergence (shift below
    1e-3 px or 100 iterations), modes closer than bandwidth/2 merge, and
    every point joins its nearest surviving mode. Members that end up
    farther than one bandwidth from their cluster mean are peeled into
    singletons so the radius invariant holds on any input. Clusters are
    ordered by first member appearance.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] < 1 or points.shape[1] != 2:
        raise ValueError("points must be a nonempty (n,2) array")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    if conf is None:
        conf = np.zeros(points.shape[0])
    conf = np.asarray(conf, dtype=np.float64)
    labels = _kernels.cluster_points(points, float(bandwidth))
    clusters = []
    for c in range(int(labels.max()) + 1):
        members = labels == c
        pts = points[members]
        clusters.append(JointCluster(pts.mean(axis=0), pts, conf[members],
                                     frame, joint_id))
    return clusters


def edge_cost(a: JointCluster, b: JointCluster, capacity: int,
              cfg: MergeConfig) -> float:
    """Spatial-temporal transition cost between clusters of one joint in
    increasing frames."""
    if a.frame >= 0 and b.frame >= 0 and b.frame <= a.frame:
        raise ValueError(f"clusters must advance in time ({a.frame} -> {b.frame})")
    if a.joint_id != b.joint_id:
        raise ValueError("clusters belong to different joints")
    if a.size > capacity or b.size > capacity:
        raise ValueError("cluster larger than the hypothesis capacity")
    d2 = float(((a.center - b.center) ** 2).sum())
    return float((capacity - a.size) + (capacity - b.size) + cfg.lam * d2)


def solve_layer_path(sizes, centers, capacity: int, lam: float,
                     size_weight: float = 1.0) -> tuple[list[int], float]:
    """Cheapest source-to-sink path through layered clusters via Dijkstra.

    sizes/centers hold one array per layer. Virtual source and sink edges
    carry only the destination/source node's size term, so every node on a
    path pays 2*(capacity - size) in total. Ties prefer larger clusters,
    then lower cluster index. Returns (per-layer cluster index, total cost).
    """
    n_layers = len(sizes)
    if n_layers == 0:
        raise ValueError("need at least one layer")
    sizes = [np.asarray(s, dtype=np.float64) for s in sizes]
    centers = [np.asarray(c, dtype=np.float64).reshape(-1, 2) for c in centers]
    for sz in sizes:
        if sz.shape[0] == 0:
            raise ValueError("empty layer")
        if sz.max() > capacity:
            raise ValueError("cluster larger than the hypothesis capacity")

    inf = float("inf")
    dist = [np.full(len(s), inf) for s in sizes]
    pred = [np.full(len(s), -1, np.int64) for s in sizes]
    settled = [np.zeros(len(s), bool) for s in sizes]

    heap = []
    for i, sz in enumerate(sizes[0]):
        dist[0][i] = size_weight * (capacity - sz)
        heapq.heappush(heap, (dist[0][i], 0, -float(sz), i))

    while heap:
        d, layer, _, i = heapq.heappop(heap)
        if settled[layer][i] or d > dist[layer][i]:
            continue
        settled[layer][i] = True
        if layer + 1 >= n_layers:
            continue
        nxt = layer + 1
        d2 = ((centers[nxt] - centers[layer][i]) ** 2).sum(axis=1)
        costs = d + size_weight * ((capacity - sizes[layer][i])
                                   + (capacity - sizes[nxt])) + lam * d2
        for j in range(len(sizes[nxt])):
            nd = float(costs[j])
            if nd < dist[nxt][j]:
                dist[nxt][j] = nd
                pred[nxt][j] = i
                heapq.heappush(heap, (nd, nxt, -float(sizes[nxt][j]), j))
            elif nd == dist[nxt][j] and not settled[nxt][j]:
                p = int(pred[nxt][j])
                if _pred_better(sizes[layer][i], i, sizes[layer][p], p):
                    pred[nxt][j] = i

    last = n_layers - 1
    exit_cost = dist[last] + size_weight * (capacity - sizes[last])
    best = 0
    for j in range(1, len(exit_cost)):
        if exit_cost[j] < exit_cost[best] or (
                exit_cost[j] == exit_cost[best]
                and _pred_better(sizes[last][j], j, sizes[last][best], best)):
            best = j
    total = float(exit_cost[best])

    path = [0] * n_layers
    node = best
    for layer in range(last, -1, -1):
        path[layer] = int(node)
        node = pred[layer][node]
    return path, total


def _pred_better(sz_new, idx_new, sz_old, idx_old) -> bool:
    if sz_new != sz_old:
        return sz_new > sz_old
    return idx_new < idx_old


def _frame_bandwidth(track: Track, frame: int, cfg: MergeConfig) -> float:
    heads = [p.head_size for p, _ in track.frames[frame] if p.head_size]
    if heads:
        return cfg.radius_scale * float(np.mean(heads))
    if cfg.fallback_radius is not None:
        return float(cfg.fallback_radius)
    if track.boxes:
        src = min(track.boxes, key=lambda s: (abs(s - frame), s))
        return cfg.radius_scale * 0.25 * track.boxes[src].diagonal
    raise ValueError(
        "cannot derive a clustering bandwidth: no head sizes, no detection "
        "boxes, and no fallback_radius configured")


def st_merge(track: Track, cfg: MergeConfig, capacity: int) -> Track:
    """Full spatial-temporal merge of every frame's hypotheses."""
    return _merge(track, cfg, capacity, lam=cfg.lam, size_weight=1.0)


def merge_track(track: Track, cfg: MergeConfig, capacity: int,
                mode: str = "full") -> Track:
    """Merge with one of the MERGE_MODES.

    spatial disables the motion term (lam=0), temporal disables the cluster
    size terms, full applies both, baseline skips clustering entirely.
    """
    if mode not in MERGE_MODES:
        raise ValueError(f"unknown merge mode {mode!r}")
    if mode == "baseline":
        merged = {f: baseline_merge(h) for f, h in sorted(track.frames.items())}
        return Track(track.track_id, dict(track.frames), merged, dict(track.boxes))
    if mode == "spatial":
        return _merge(track, cfg, capacity, lam=0.0, size_weight=1.0)
    if mode == "temporal":
        return _merge(track, cfg, capacity, lam=cfg.lam, size_weight=0.0)
    return _merge(track, cfg, capacity, lam=cfg.lam, size_weight=1.0)


def _merge(track: Track, cfg: MergeConfig, capacity: int,
           lam: float, size_weight: float) -> Track:
    if not track.frames:
        raise EmptyHypotheses(f"track {track.track_id} has no frames")
    frames = sorted(track.frames)
    lo, hi = frames[0], frames[-1]
    if len(frames) != hi - lo + 1:
        raise EmptyHypotheses(
            f"track {track.track_id} frame range [{lo},{hi}] has gaps")
    for f in frames:
        if len(track.frames[f]) == 0:
            raise EmptyHypotheses(f"track {track.track_id} frame {f} is empty")

    k = track.frames[lo].hypotheses[0][0].k
    bandwidths = np.array([_frame_bandwidth(track, f, cfg) for f in frames])

    # per frame, hypotheses in source order for determinism
    hyp_xy = []
    hyp_conf = []
    hyp_vis = []
    for f in frames:
        items = sorted(track.frames[f], key=lambda it: it[1])
        hyp_xy.append(np.stack([p.xy for p, _ in items]))
        hyp_conf.append(np.stack([p.conf for p, _ in items]))
        hyp_vis.append(np.stack([p.visible for p, _ in items]))

    out_xy = np.zeros((len(frames), k, 2))
    out_conf = np.zeros((len(frames), k))
    out_vis = np.zeros((len(frames), k), bool)

    for joint in range(k):
        pts_parts = []
        conf_parts = []
        layer_frames = []
        offsets = [0]
        bw_parts = []
        for fi in range(len(frames)):
            mask = hyp_vis[fi][:, joint]
            if not mask.any():
                continue
            pts_parts.append(hyp_xy[fi][mask, joint, :])
            conf_parts.append(hyp_conf[fi][mask, joint])
            offsets.append(offsets[-1] + int(mask.sum()))
            layer_frames.append(fi)
            bw_parts.append(bandwidths[fi])
        if not layer_frames:
            continue

        pts = np.concatenate(pts_parts)
        confs = np.concatenate(conf_parts)
        labels, ncl, centers, sizes, best_conf = _kernels.cluster_sequence(
            pts, confs, np.array(offsets), np.array(bw_parts))

        layer_sizes = []
        layer_centers = []
        layer_bconf = []
        for li in range(len(layer_frames)):
            a, m = offsets[li], int(ncl[li])
            layer_sizes.append(sizes[a:a + m])
            layer_centers.append(centers[a:a + m])
            layer_bconf.append(best_conf[a:a + m])

        if ncl[:len(layer_frames)].max() == 1:
            path = [0] * len(layer_frames)  # every layer is forced
        else:
            path, _ = solve_layer_path(layer_sizes, layer_centers, capacity,
                                       lam, size_weight)
        for li, fi in enumerate(layer_frames):
            c = path[li]
            out_xy[fi, joint] = layer_centers[li][c]
            out_conf[fi, joint] = layer_bconf[li][c]
            out_vis[fi, joint] = True

    merged = {}
    for fi, f in enumerate(frames):
        merged[f] = Pose(f, out_xy[fi], out_conf[fi], out_vis[fi])
    return Track(track.track_id, dict(track.frames), merged, dict(track.boxes))
