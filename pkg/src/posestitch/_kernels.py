"""Hot numeric kernels: pairwise keypoint similarity and flat-kernel mean shift.

Two interchangeable backends live here. The numba ``@njit`` versions are the
default; set ``POSESTITCH_NUMBA=0`` (or install without numba) to select the
pure-numpy fallbacks. ``benchmarks/bench_kernels.py`` times both and checks
they agree.

All kernels are pure functions of their array arguments and are safe to call
from multiple threads.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay graceful
    HAS_NUMBA = False

_ENV = os.environ.get("POSESTITCH_NUMBA", "1").strip().lower()
USE_NUMBA = HAS_NUMBA and _ENV not in ("0", "false", "off", "no")

# Mode seeking stops once the squared shift drops below (1e-3 px)^2 or after
# 100 iterations, whichever comes first.
_SHIFT_TOL2 = 1e-6
_MAX_ITERS = 100
# Slack on the member-to-center radius check, absorbs fp noise only.
_RADIUS_EPS = 1e-9


# ---------------------------------------------------------------------------
# pairwise pose similarity
# ---------------------------------------------------------------------------

def _oks_pair_py(xy_a, vis_a, xy_b, vis_b, s, kappas):
    """Mean of exp(-d^2 / (2 s^2 kappa^2)) over jointly visible joints.

    Returns -1.0 when the visible sets are disjoint (caller raises).
    """
    acc = 0.0
    cnt = 0
    for k in range(xy_a.shape[0]):
        if vis_a[k] and vis_b[k]:
            dx = xy_a[k, 0] - xy_b[k, 0]
            dy = xy_a[k, 1] - xy_b[k, 1]
            d2 = dx * dx + dy * dy
            acc += math.exp(-d2 / (2.0 * s * s * kappas[k] * kappas[k]))
            cnt += 1
    if cnt == 0:
        return -1.0
    return acc / cnt


def _oks_pair_numpy(xy_a, vis_a, xy_b, vis_b, s, kappas):
    common = vis_a & vis_b
    if not common.any():
        return -1.0
    d2 = ((xy_a[common] - xy_b[common]) ** 2).sum(axis=1)
    return float(np.exp(-d2 / (2.0 * s * s * kappas[common] ** 2)).mean())


def _oks_frames_mean_py(xy_a, vis_a, xy_b, vis_b, s, kappas):
    """Mean per-frame OKS over the frames with jointly visible joints.

    Inputs are stacked per frame: xy (F,K,2), vis (F,K), scale s (F,).
    Returns -1.0 when no frame contributes.
    """
    total = 0.0
    n = 0
    for f in range(xy_a.shape[0]):
        acc = 0.0
        cnt = 0
        for k in range(xy_a.shape[1]):
            if vis_a[f, k] and vis_b[f, k]:
                dx = xy_a[f, k, 0] - xy_b[f, k, 0]
                dy = xy_a[f, k, 1] - xy_b[f, k, 1]
                d2 = dx * dx + dy * dy
                acc += math.exp(-d2 / (2.0 * s[f] * s[f] * kappas[k] * kappas[k]))
                cnt += 1
        if cnt > 0:
            total += acc / cnt
            n += 1
    if n == 0:
        return -1.0
    return total / n


def _oks_frames_mean_numpy(xy_a, vis_a, xy_b, vis_b, s, kappas):
    total = 0.0
    n = 0
    for f in range(xy_a.shape[0]):
        val = _oks_pair_numpy(xy_a[f], vis_a[f], xy_b[f], vis_b[f],
                              float(s[f]), kappas)
        if val >= 0:
            total += val
            n += 1
    if n == 0:
        return -1.0
    return total / n


# ---------------------------------------------------------------------------
# flat-kernel mean shift over one set of 2D points
# ---------------------------------------------------------------------------

def _cluster_frame_py(pts, bandwidth, labels):
    """Cluster one frame's points; writes labels in place, returns #clusters.

    Steps: seek each point's mode (flat kernel), merge modes closer than
    bandwidth/2 in seed order, assign every point to its nearest surviving
    mode, then peel members farther than one bandwidth from their cluster
    mean into singletons so the radius invariant holds on any input.
    """
    n = pts.shape[0]
    bw2 = bandwidth * bandwidth
    modes = np.empty((n, 2))
    for i in range(n):
        mx = pts[i, 0]
        my = pts[i, 1]
        for _ in range(_MAX_ITERS):
            sx = 0.0
            sy = 0.0
            c = 0
            for j in range(n):
                dx = pts[j, 0] - mx
                dy = pts[j, 1] - my
                if dx * dx + dy * dy <= bw2:
                    sx += pts[j, 0]
                    sy += pts[j, 1]
                    c += 1
            nx = sx / c
            ny = sy / c
            shift2 = (nx - mx) * (nx - mx) + (ny - my) * (ny - my)
            mx = nx
            my = ny
            if shift2 < _SHIFT_TOL2:
                break
        modes[i, 0] = mx
        modes[i, 1] = my

    # merge converged modes (seed order keeps this deterministic)
    centers = np.empty((n, 2))
    m = 0
    merge_r2 = 0.25 * bw2
    for i in range(n):
        hit = -1
        for c in range(m):
            dx = modes[i, 0] - centers[c, 0]
            dy = modes[i, 1] - centers[c, 1]
            if dx * dx + dy * dy < merge_r2:
                hit = c
                break
        if hit < 0:
            centers[m, 0] = modes[i, 0]
            centers[m, 1] = modes[i, 1]
            m += 1

    # nearest surviving mode, lowest index wins ties
    for i in range(n):
        best = 0
        bd = 1e300
        for c in range(m):
            dx = pts[i, 0] - centers[c, 0]
            dy = pts[i, 1] - centers[c, 1]
            d2 = dx * dx + dy * dy
            if d2 < bd:
                bd = d2
                best = c
        labels[i] = best

    # drop empty clusters, relabel in first-member order
    m = _compact_labels_py(labels, n)

    # radius guard: peel the worst straggler until every member sits within
    # one bandwidth of its cluster mean
    while True:
        worst_i = -1
        worst_d2 = bw2 + _RADIUS_EPS
        for c in range(m):
            cx = 0.0
            cy = 0.0
            cnt = 0
            for i in range(n):
                if labels[i] == c:
                    cx += pts[i, 0]
                    cy += pts[i, 1]
                    cnt += 1
            cx /= cnt
            cy /= cnt
            for i in range(n):
                if labels[i] == c:
                    dx = pts[i, 0] - cx
                    dy = pts[i, 1] - cy
                    d2 = dx * dx + dy * dy
                    if d2 > worst_d2:
                        worst_d2 = d2
                        worst_i = i
        if worst_i < 0:
            break
        labels[worst_i] = m
        m += 1
        m = _compact_labels_py(labels, n)
    return m


def _compact_labels_py(labels, n):
    """Relabel to 0..m-1 in order of first appearance; returns m."""
    seen = np.full(n + 1, -1, np.int64)
    m = 0
    for i in range(n):
        old = labels[i]
        if seen[old] < 0:
            seen[old] = m
            m += 1
        labels[i] = seen[old]
    return m


def _cluster_frame_numpy(pts, bandwidth, labels):
    """Vectorized equivalent of :func:`_cluster_frame_py`."""
    n = pts.shape[0]
    bw2 = bandwidth * bandwidth
    modes = pts.astype(np.float64).copy()
    active = np.ones(n, bool)
    for _ in range(_MAX_ITERS):
        if not active.any():
            break
        d2 = ((modes[active, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        member = d2 <= bw2
        counts = member.sum(axis=1)
        new = (member[:, :, None] * pts[None, :, :]).sum(axis=1) / counts[:, None]
        shift2 = ((new - modes[active]) ** 2).sum(axis=1)
        modes[active] = new
        still = shift2 >= _SHIFT_TOL2
        idx = np.flatnonzero(active)
        active[idx[~still]] = False

    centers = []
    merge_r2 = 0.25 * bw2
    for i in range(n):
        for c, ctr in enumerate(centers):
            if ((modes[i] - ctr) ** 2).sum() < merge_r2:
                break
        else:
            centers.append(modes[i])
    centers = np.asarray(centers)

    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels[:] = d2.argmin(axis=1)
    m = _compact_labels_py(labels, n)

    while True:
        worst_i = -1
        worst_d2 = bw2 + _RADIUS_EPS
        for c in range(m):
            members = labels == c
            ctr = pts[members].mean(axis=0)
            dist2 = ((pts[members] - ctr) ** 2).sum(axis=1)
            j = int(dist2.argmax())
            if dist2[j] > worst_d2:
                worst_d2 = dist2[j]
                worst_i = int(np.flatnonzero(members)[j])
        if worst_i < 0:
            break
        labels[worst_i] = m
        m += 1
        m = _compact_labels_py(labels, n)
    return m


# ---------------------------------------------------------------------------
# batched per-frame clustering for the merge stage
# ---------------------------------------------------------------------------

def _cluster_sequence_py(pts, conf, offsets, bandwidths, labels, ncl,
                         centers, sizes, best_conf):
    """Cluster every frame segment of a flattened point sequence.

    ``pts[offsets[f]:offsets[f+1]]`` holds frame f's points. Outputs are
    written into the flat arrays: per-point labels (local to the frame) and,
    per frame, cluster centers / sizes / best member confidence packed at
    ``offsets[f]``.
    """
    nf = offsets.shape[0] - 1
    for f in range(nf):
        a = offsets[f]
        b = offsets[f + 1]
        if b == a:
            ncl[f] = 0
            continue
        m = _cluster_frame_inner(pts[a:b], bandwidths[f], labels[a:b])
        ncl[f] = m
        for c in range(m):
            cx = 0.0
            cy = 0.0
            cnt = 0
            bc = -1.0
            for i in range(a, b):
                if labels[i] == c:
                    cx += pts[i, 0]
                    cy += pts[i, 1]
                    cnt += 1
                    if conf[i] > bc:
                        bc = conf[i]
            centers[a + c, 0] = cx / cnt
            centers[a + c, 1] = cy / cnt
            sizes[a + c] = cnt
            best_conf[a + c] = bc


if USE_NUMBA:
    _oks_pair = njit(cache=True)(_oks_pair_py)
    _oks_frames_mean = njit(cache=True)(_oks_frames_mean_py)
    _compact_labels = njit(cache=True)(_compact_labels_py)

    @njit(cache=True)
    def _cluster_frame_inner(pts, bandwidth, labels):
        n = pts.shape[0]
        bw2 = bandwidth * bandwidth
        modes = np.empty((n, 2))
        for i in range(n):
            mx = pts[i, 0]
            my = pts[i, 1]
            for _ in range(_MAX_ITERS):
                sx = 0.0
                sy = 0.0
                c = 0
                for j in range(n):
                    dx = pts[j, 0] - mx
                    dy = pts[j, 1] - my
                    if dx * dx + dy * dy <= bw2:
                        sx += pts[j, 0]
                        sy += pts[j, 1]
                        c += 1
                nx = sx / c
                ny = sy / c
                shift2 = (nx - mx) * (nx - mx) + (ny - my) * (ny - my)
                mx = nx
                my = ny
                if shift2 < _SHIFT_TOL2:
                    break
            modes[i, 0] = mx
            modes[i, 1] = my

        centers = np.empty((n, 2))
        m = 0
        merge_r2 = 0.25 * bw2
        for i in range(n):
            hit = -1
            for c in range(m):
                dx = modes[i, 0] - centers[c, 0]
                dy = modes[i, 1] - centers[c, 1]
                if dx * dx + dy * dy < merge_r2:
                    hit = c
                    break
            if hit < 0:
                centers[m, 0] = modes[i, 0]
                centers[m, 1] = modes[i, 1]
                m += 1

        for i in range(n):
            best = 0
            bd = 1e300
            for c in range(m):
                dx = pts[i, 0] - centers[c, 0]
                dy = pts[i, 1] - centers[c, 1]
                d2 = dx * dx + dy * dy
                if d2 < bd:
                    bd = d2
                    best = c
            labels[i] = best

        m = _compact_labels(labels, n)

        while True:
            worst_i = -1
            worst_d2 = bw2 + _RADIUS_EPS
            for c in range(m):
                cx = 0.0
                cy = 0.0
                cnt = 0
                for i in range(n):
                    if labels[i] == c:
                        cx += pts[i, 0]
                        cy += pts[i, 1]
                        cnt += 1
                cx /= cnt
                cy /= cnt
                for i in range(n):
                    if labels[i] == c:
                        dx = pts[i, 0] - cx
                        dy = pts[i, 1] - cy
                        d2 = dx * dx + dy * dy
                        if d2 > worst_d2:
                            worst_d2 = d2
                            worst_i = i
            if worst_i < 0:
                break
            labels[worst_i] = m
            m += 1
            m = _compact_labels(labels, n)
        return m

    _cluster_sequence = njit(cache=True)(_cluster_sequence_py)

    def _cluster_frame(pts, bandwidth, labels):
        return _cluster_frame_inner(pts, bandwidth, labels)

else:
    _oks_pair = _oks_pair_numpy
    _oks_frames_mean = _oks_frames_mean_numpy
    _compact_labels = _compact_labels_py
    _cluster_frame_inner = _cluster_frame_numpy
    _cluster_frame = _cluster_frame_numpy
    _cluster_sequence = _cluster_sequence_py


def oks_pair(xy_a, vis_a, xy_b, vis_b, s, kappas):
    """Backend-dispatched pairwise similarity; see :func:`_oks_pair_py`."""
    return _oks_pair(xy_a, vis_a, xy_b, vis_b, s, kappas)


def oks_frames_mean(xy_a, vis_a, xy_b, vis_b, s, kappas):
    """Backend-dispatched frame-stacked similarity; see
    :func:`_oks_frames_mean_py`."""
    return _oks_frames_mean(xy_a, vis_a, xy_b, vis_b, s, kappas)


def cluster_points(pts: np.ndarray, bandwidth: float) -> np.ndarray:
    """Cluster (n,2) points; returns per-point labels in 0..m-1."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    labels = np.empty(pts.shape[0], np.int64)
    _cluster_frame(pts, float(bandwidth), labels)
    return labels


def cluster_sequence(pts, conf, offsets, bandwidths):
    """Cluster each frame segment of a flattened sequence in one call.

    Returns (labels, ncl, centers, sizes, best_conf); frame f's cluster c
    stats live at flat index offsets[f] + c.
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    conf = np.ascontiguousarray(conf, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    bandwidths = np.ascontiguousarray(bandwidths, dtype=np.float64)
    n = pts.shape[0]
    labels = np.empty(n, np.int64)
    ncl = np.zeros(offsets.shape[0] - 1, np.int64)
    centers = np.empty((n, 2), np.float64)
    sizes = np.zeros(n, np.int64)
    best_conf = np.zeros(n, np.float64)
    _cluster_sequence(pts, conf, offsets, bandwidths, labels, ncl,
                      centers, sizes, best_conf)
    return labels, ncl, centers, sizes, best_conf
