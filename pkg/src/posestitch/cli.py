"""Command-line surface and pipeline orchestration.

Subcommands: stitch, merge, eval, simulate, sweep. All hyperparameters live
in one key-value config file and every one can be overridden by a flag.
Exit codes: 0 success, 1 schema error, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import multiprocessing
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import io
from .core import (ClipConfig, Pose, ScheduleViolation, Track,
                   hypothesis_capacity)
from .metrics import (DEFAULT_MIN_BOX_AREA, DEFAULT_MIN_TRACK_LEN, EvalReport,
                      GroundTruth, evaluate)
from .similarity import OksParams, load_kappas
from .stitcher import DEFAULT_GATE, link_framewise, stitch
from .stmerge import MERGE_MODES, EmptyHypotheses, MergeConfig, merge_track
from .synth import Scenario, generate

CONFIG_KEYS = ("clip_len", "step", "lambda", "radius_scale", "gate",
               "merge_mode", "min_track_len", "min_box_area", "seed",
               "workers", "fallback_radius")


@dataclass(frozen=True)
class PipelineConfig:
    clip_len: int = 9
    step: int = 1
    lam: float = 0.1
    radius_scale: float = 0.5
    gate: float = DEFAULT_GATE
    merge_mode: str = "full"
    min_track_len: int = DEFAULT_MIN_TRACK_LEN
    min_box_area: float = DEFAULT_MIN_BOX_AREA
    seed: int = 0
    workers: int = 1
    fallback_radius: float | None = None
    kappas: np.ndarray | None = None
    thresholds: np.ndarray | None = None

    @property
    def clip(self) -> ClipConfig:
        return ClipConfig(self.clip_len, self.step)

    @property
    def merge(self) -> MergeConfig:
        return MergeConfig(self.lam, self.radius_scale, self.fallback_radius)

    @property
    def oks_params(self) -> OksParams:
        return OksParams(self.kappas)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--clip-len", type=int, dest="clip_len")
    p.add_argument("--step", type=int)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--radius-scale", type=float, dest="radius_scale")
    p.add_argument("--gate", type=float)
    p.add_argument("--merge-mode", choices=MERGE_MODES, dest="merge_mode")
    p.add_argument("--min-track-len", type=int, dest="min_track_len")
    p.add_argument("--min-box-area", type=float, dest="min_box_area")
    p.add_argument("--fallback-radius", type=float, dest="fallback_radius")
    p.add_argument("--kappa-file", dest="kappa_file")
    p.add_argument("--thresholds-file", dest="thresholds_file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)


def _resolve(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        raw = io.load_config(args.config)
        unknown = set(raw) - set(CONFIG_KEYS)
        if unknown:
            raise io.SchemaError(f"unknown config keys: {sorted(unknown)}")
        casts = {"clip_len": int, "step": int, "lambda": float,
                 "radius_scale": float, "gate": float, "merge_mode": str,
                 "min_track_len": int, "min_box_area": float, "seed": int,
                 "workers": int, "fallback_radius": float}
        fields = {"lambda": "lam"}
        updates = {fields.get(k, k): casts[k](v) for k, v in raw.items()}
        cfg = replace(cfg, **updates)
    for name in ("clip_len", "step", "lam", "radius_scale", "gate",
                 "merge_mode", "min_track_len", "min_box_area", "seed",
                 "workers", "fallback_radius"):
        val = getattr(args, name, None)
        if val is not None:
            cfg = replace(cfg, **{name: val})
    if getattr(args, "kappa_file", None):
        cfg = replace(cfg, kappas=load_kappas(args.kappa_file))
    if getattr(args, "thresholds_file", None):
        raw = load_kappas(args.thresholds_file)
        cfg = replace(cfg, thresholds=raw)
    return cfg


def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with multiprocessing.Pool(workers) as pool:
        return pool.map(fn, items)


# --- pipeline pieces -------------------------------------------------------

def keyframe_detections(tracklets, video_len: int) -> list[list[Pose]]:
    """Per-frame detections as a framewise baseline would see them: each
    tracklet contributes only its keyframe pose."""
    frames: list[list[Pose]] = [[] for _ in range(video_len)]
    for t in tracklets:
        frames[t.keyframe].append(t.pose_at(t.keyframe))
    return frames


def run_pipeline(scenario: Scenario, cfg: PipelineConfig
                 ) -> tuple[EvalReport, list[Track], GroundTruth]:
    """simulate -> stitch -> merge -> eval, in process.

    A clip length of 1 has no overlapping windows to stitch, so it runs the
    framewise greedy-linking baseline instead (the 2D ablation row).
    """
    clip = cfg.clip
    gt, tracklets = generate(scenario, clip)
    merged = pipeline_tracks(tracklets, scenario.video_len, cfg)
    report = evaluate(merged, gt, cfg.thresholds,
                      cfg.min_track_len, cfg.min_box_area)
    return report, merged, gt


def pipeline_tracks(tracklets, video_len: int, cfg: PipelineConfig) -> list[Track]:
    """Stitch and merge one video's tracklets into final tracks."""
    clip = cfg.clip
    params = cfg.oks_params
    if clip.clip_len == 1:
        tracks = link_framewise(keyframe_detections(tracklets, video_len),
                                params, cfg.gate)
        mode = "baseline"  # single-hypothesis frames: all modes coincide
    else:
        tracks = stitch(tracklets, clip, params, cfg.gate, video_len)
        mode = cfg.merge_mode
    capacity = _capacity(tracks, clip)
    return [merge_track(t, cfg.merge, capacity, mode) for t in tracks]


def _capacity(tracks, clip: ClipConfig) -> int:
    cap = hypothesis_capacity(clip)
    for t in tracks:
        for hs in t.frames.values():
            cap = max(cap, hs.capacity, len(hs))
    return cap


# --- subcommands -----------------------------------------------------------

def cmd_stitch(args) -> int:
    cfg = _resolve(args)
    by_video = io.read_tracklets(args.tracklets)
    params = cfg.oks_params
    results = {}
    items = sorted(by_video.items())
    stitched = _pmap(_StitchWorker(cfg, params), items, cfg.workers)
    for (vid, _), tracks in zip(items, stitched):
        results[vid] = tracks
    io.write_tracks(args.out, results)
    return 0


class _StitchWorker:
    def __init__(self, cfg: PipelineConfig, params: OksParams):
        self.cfg = cfg
        self.params = params

    def __call__(self, item):
        vid, tracklets = item
        return stitch(tracklets, self.cfg.clip, self.params, self.cfg.gate)


def cmd_merge(args) -> int:
    cfg = _resolve(args)
    by_video = io.read_tracks(args.tracks)
    items = sorted(by_video.items())
    merged = _pmap(_MergeWorker(cfg), items, cfg.workers)
    io.write_tracks(args.out, {vid: tr for (vid, _), tr in zip(items, merged)})
    return 0


class _MergeWorker:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg

    def __call__(self, item):
        vid, tracks = item
        capacity = _capacity(tracks, self.cfg.clip)
        return [merge_track(t, self.cfg.merge, capacity, self.cfg.merge_mode)
                for t in tracks]


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    tracks_by_video = io.read_tracks(args.merged)
    gt_by_video = io.read_gt(args.gt)
    missing = set(gt_by_video) - set(tracks_by_video)
    records = []
    reports = []
    for vid in sorted(gt_by_video):
        tracks = tracks_by_video.get(vid, [])
        report = evaluate(tracks, gt_by_video[vid], cfg.thresholds,
                          cfg.min_track_len, cfg.min_box_area)
        reports.append((vid, report))
        records.append(dict(report.to_dict(), video_id=vid))
    combined = _combined_report(tracks_by_video, gt_by_video, cfg)
    records.append(dict(combined.to_dict(), video_id="__overall__"))
    if args.out:
        io.write_report(args.out, records)
    print(combined.table())
    if missing:
        print(f"note: no predictions for videos {sorted(missing)}",
              file=sys.stderr)
    return 0


def _combined_report(tracks_by_video, gt_by_video, cfg: PipelineConfig) -> EvalReport:
    """Evaluate all videos as one dataset by remapping frames and track ids
    into disjoint blocks (AP needs a global confidence ranking)."""
    frames = {}
    tracks = []
    frame_off = 0
    gid_off = 0
    pid_off = 0
    for vid in sorted(gt_by_video):
        gt = gt_by_video[vid]
        vid_tracks = tracks_by_video.get(vid, [])
        max_frame = max(gt.frames, default=-1)
        for t in vid_tracks:
            for f in t.merged:
                max_frame = max(max_frame, f)
        for f, entries in gt.frames.items():
            frames[f + frame_off] = [
                (tid + gid_off,
                 Pose(f + frame_off, p.xy, p.conf, p.visible, p.head_size))
                for tid, p in entries]
        for t in vid_tracks:
            nt = Track(t.track_id + pid_off)
            for f, p in t.merged.items():
                nt.merged[f + frame_off] = Pose(f + frame_off, p.xy, p.conf,
                                                p.visible, p.head_size)
            tracks.append(nt)
        frame_off += max_frame + 1
        gid_off += 1 + max((tid for e in gt.frames.values() for tid, _ in e),
                           default=-1)
        pid_off += 1 + max((t.track_id for t in vid_tracks), default=-1)
    gt_all = GroundTruth(frames)
    return evaluate(tracks, gt_all, cfg.thresholds,
                    cfg.min_track_len, cfg.min_box_area)


def _load_scenario(path, seed_override=None) -> Scenario:
    raw = io.load_config(path)
    kwargs = {}
    casts = {"n_people": int, "video_len": int, "head_size": float,
             "spacing": float, "miss_rate": float, "pose_noise": float,
             "swap_rate": float, "seed": int}
    ranges = {"amplitude": "amplitude_range", "period": "period_range",
              "speed": "speed_range"}
    pending: dict[str, dict[str, float]] = {}
    for key, val in raw.items():
        if key in casts:
            kwargs[key] = casts[key](val)
        else:
            base, _, bound = key.rpartition("_")
            if base in ranges and bound in ("min", "max"):
                pending.setdefault(base, {})[bound] = float(val)
            else:
                raise io.SchemaError(f"unknown scenario key {key!r}")
    for base, bounds in pending.items():
        if set(bounds) != {"min", "max"}:
            raise io.SchemaError(f"scenario key {base} needs both min and max")
        kwargs[ranges[base]] = (bounds["min"], bounds["max"])
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return Scenario(**kwargs)


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    scenario = _load_scenario(args.scenario, getattr(args, "seed", None))
    gt, tracklets = generate(scenario, cfg.clip)
    vid = f"scenario-{scenario.seed}"
    io.write_gt(args.out_gt, {vid: gt})
    io.write_tracklets(args.out_tracklets, {vid: tracklets})
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    scenario = _load_scenario(args.scenario)
    clip_lens = _int_list(args.clip_lens) if args.clip_lens else [cfg.clip_len]
    steps = _int_list(args.steps) if args.steps else [cfg.step]
    lams = _float_list(args.lambdas) if args.lambdas else [cfg.lam]
    seeds = list(range(cfg.seed, cfg.seed + args.seeds))

    records = []
    for clip_len in clip_lens:
        for step in steps:
            for lam in lams:
                point = replace(cfg, clip_len=clip_len, step=step, lam=lam)
                items = [(replace(scenario, seed=s), point) for s in seeds]
                reports = _pmap(_sweep_one, items, cfg.workers)
                rec = {"clip_len": clip_len, "step": step, "lambda": lam,
                       "seeds": len(seeds)}
                for key in ("ap", "mota", "fn", "fp", "idsw"):
                    vals = np.array([r[key] for r in reports], float)
                    rec[f"mean_{key}"] = float(vals.mean())
                    rec[f"sem_{key}"] = _sem(vals)
                records.append(rec)
                print(f"clip_len={clip_len} step={step} lambda={lam} "
                      f"mAP={rec['mean_ap']:.2f} MOTA={rec['mean_mota']:.4f} "
                      f"FN={rec['mean_fn']:.1f}")
    if args.out:
        io.write_report(args.out, records)
    return 0


def _sem(vals: np.ndarray) -> float:
    if len(vals) < 2:
        return 0.0
    return float(vals.std(ddof=1) / np.sqrt(len(vals)))


def _sweep_one(item):
    scenario, cfg = item
    report, _, _ = run_pipeline(scenario, cfg)
    return {"ap": report.mean_ap, "mota": report.mean_mota,
            "fn": int(report.fn.sum()), "fp": int(report.fp.sum()),
            "idsw": int(report.idsw.sum())}


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posestitch",
        description="Stitch pose tracklets into tracks, merge hypotheses, "
                    "and evaluate AP/MOTA.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stitch", help="tracklets file -> tracks file")
    p.add_argument("--tracklets", required=True)
    p.add_argument("--out", required=True)
    _add_common_flags(p)
    p.set_defaults(func=cmd_stitch)

    p = sub.add_parser("merge", help="tracks file -> merged tracks file")
    p.add_argument("--tracks", required=True)
    p.add_argument("--out", required=True)
    _add_common_flags(p)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("eval", help="merged tracks + ground truth -> report")
    p.add_argument("--merged", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    _add_common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="scenario config -> gt + tracklets")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-gt", required=True, dest="out_gt")
    p.add_argument("--out-tracklets", required=True, dest="out_tracklets")
    _add_common_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of clip_len/step/lambda -> metrics")
    p.add_argument("--scenario", required=True)
    p.add_argument("--clip-lens", dest="clip_lens")
    p.add_argument("--steps", dest="steps")
    p.add_argument("--lambdas", dest="lambdas")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out")
    _add_common_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except io.SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except (ScheduleViolation, EmptyHypotheses, ValueError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
