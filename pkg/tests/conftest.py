import numpy as np
import pytest

from posestitch import ClipConfig, OksParams, Pose, Tracklet
from posestitch.similarity import pose_bbox
from posestitch.core import enlarge_bbox


@pytest.fixture
def params():
    return OksParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_pose(frame, center, k=15, spread=20.0, conf=None, visible=None,
              head_size=None, jitter=None):
    """Deterministic k-joint pose fanned out around a center point."""
    angles = np.linspace(0.0, 2.0 * np.pi, k, endpoint=False)
    xy = np.stack([center[0] + spread * np.cos(angles),
                   center[1] + spread * np.sin(angles)], axis=1)
    if jitter is not None:
        xy = xy + jitter
    if conf is None:
        conf = np.full(k, 0.9)
    if visible is None:
        visible = np.ones(k, bool)
    return Pose(frame, xy, np.asarray(conf, float), visible, head_size)


def make_tracklet(keyframe, cfg: ClipConfig, center, velocity=(0.0, 0.0),
                  video_len=10**9, k=15, source_id="", conf=None):
    """Tracklet of a person moving linearly; box from the keyframe extent."""
    lo = max(0, keyframe - cfg.delta)
    hi = min(video_len - 1, keyframe + cfg.delta)
    poses = []
    for f in range(lo, hi + 1):
        c = (center[0] + velocity[0] * (f - keyframe),
             center[1] + velocity[1] * (f - keyframe))
        poses.append(make_pose(f, c, k=k, conf=conf))
    box = enlarge_bbox(pose_bbox(poses[keyframe - lo]), 0.25)
    return Tracklet(keyframe, cfg.clip_len, box, tuple(poses), source_id)
