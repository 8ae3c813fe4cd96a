"""posestitch: turn per-clip multi-person pose tracklets into refined,
arbitrary-length tracks, and evaluate them PoseTrack-style."""

from .assignment import GATED, greedy_match, hungarian_solve
from .core import (BBox, ClipConfig, HypothesisSet, Joint, Pose,
                   ScheduleViolation, Track, Tracklet, enlarge_bbox,
                   hypothesis_capacity, keyframe_schedule)
from .metrics import (EvalReport, GroundTruth, compute_ap, compute_mota,
                      evaluate, filter_predictions, frame_predictions,
                      learn_thresholds, match_joints)
from .similarity import (NoCommonVisibleJoints, OksParams, load_kappas, oks,
                         oks_nms, pose_bbox, tracklet_similarity)
from .stitcher import link_framewise, stitch
from .stmerge import (EmptyHypotheses, JointCluster, MergeConfig,
                      baseline_merge, edge_cost, mean_shift, merge_track,
                      solve_layer_path, st_merge)
from .synth import GenerateInfo, Scenario, generate, generate_with_info, recovery_rate

__version__ = "0.1.0"

__all__ = [
    "BBox", "ClipConfig", "EmptyHypotheses", "EvalReport", "GATED",
    "GenerateInfo", "GroundTruth", "HypothesisSet", "Joint", "JointCluster",
    "MergeConfig", "NoCommonVisibleJoints", "OksParams", "Pose",
    "Scenario", "ScheduleViolation", "Track", "Tracklet",
    "baseline_merge", "compute_ap", "compute_mota", "edge_cost",
    "enlarge_bbox", "evaluate", "filter_predictions", "frame_predictions",
    "generate", "generate_with_info", "greedy_match", "hungarian_solve",
    "hypothesis_capacity", "keyframe_schedule", "learn_thresholds",
    "link_framewise", "load_kappas", "match_joints", "mean_shift",
    "merge_track", "oks", "oks_nms", "pose_bbox", "recovery_rate",
    "solve_layer_path", "st_merge", "stitch", "tracklet_similarity",
]
