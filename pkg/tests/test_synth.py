import numpy as np
import pytest

from posestitch import (ClipConfig, Scenario, generate,
                        generate_with_info, link_framewise, recovery_rate,
                        stitch)
from posestitch.cli import keyframe_detections

CFG = ClipConfig(9, 1)


class TestGenerate:
    def test_noiseless_tracklets_reproduce_gt(self):
        scen = Scenario(n_people=2, video_len=20, miss_rate=0.0,
                        pose_noise=0.0, swap_rate=0.0, seed=4)
        gt, tracklets = generate(scen, CFG)
        assert len(tracklets) == 2 * 20
        for t in tracklets:
            person = int(t.source_id.split(".")[0][1:])
            for pose in t.poses:
                gt_pose = dict(gt.frames[pose.frame])[person]
                assert np.array_equal(pose.xy, gt_pose.xy)
                assert np.all(pose.conf == 1.0)

    def test_full_miss_rate_emits_nothing(self):
        scen = Scenario(n_people=3, video_len=10, miss_rate=1.0, seed=0)
        _, tracklets = generate(scen, CFG)
        assert tracklets == []

    def test_seed_reproducibility(self):
        scen = Scenario(n_people=3, video_len=15, miss_rate=0.3,
                        pose_noise=2.0, swap_rate=0.3, seed=42)
        gt1, tl1, info1 = generate_with_info(scen, CFG)
        gt2, tl2, info2 = generate_with_info(scen, CFG)
        assert len(tl1) == len(tl2)
        for a, b in zip(tl1, tl2):
            assert a.source_id == b.source_id
            for pa, pb in zip(a.poses, b.poses):
                assert np.array_equal(pa.xy, pb.xy)
                assert np.array_equal(pa.conf, pb.conf)
        assert info1.corrupted == info2.corrupted
        other = generate(Scenario(n_people=3, video_len=15, miss_rate=0.3,
                                  pose_noise=2.0, swap_rate=0.3, seed=43), CFG)[1]
        assert any(not np.array_equal(a.poses[0].xy, b.poses[0].xy)
                   for a, b in zip(tl1, other))

    def test_boxes_enclose_keyframe_pose(self):
        scen = Scenario(n_people=1, video_len=9, seed=1)
        gt, tracklets = generate(scen, CFG)
        for t in tracklets:
            pose = dict(gt.frames[t.keyframe])[0]
            x0, y0 = pose.xy.min(axis=0)
            x1, y1 = pose.xy.max(axis=0)
            assert t.box.x <= x0 and t.box.y <= y0
            assert t.box.x + t.box.w >= x1 and t.box.y + t.box.h >= y1

    def test_swap_windows_recorded_and_minority(self):
        scen = Scenario(n_people=3, video_len=30, swap_rate=1.0,
                        pose_noise=1.0, seed=6)
        gt, tracklets, info = generate_with_info(scen, CFG)
        assert info.corrupted
        by_source = {t.source_id: t for t in tracklets}
        for (person, kf), (lo, hi, neigh) in info.corrupted.items():
            t = by_source[f"p{person}.k{kf}"]
            window = list(t.frame_range)
            length = hi - lo + 1
            assert length <= max(1, len(window) // 2)
            assert neigh != person
            # corrupted frames sit on the neighbour, others on the person
            for pose in t.poses:
                src = neigh if lo <= pose.frame <= hi else person
                gt_pose = dict(gt.frames[pose.frame])[src]
                d = np.linalg.norm(pose.xy - gt_pose.xy, axis=1).mean()
                assert d < 6 * scen.pose_noise

    def test_exact_recovery_when_noiseless(self, params):
        scen = Scenario(n_people=2, video_len=25, miss_rate=0.5,
                        pose_noise=0.0, swap_rate=0.0, seed=9)
        gt, tracklets = generate(scen, CFG)
        for t in tracklets:
            person = int(t.source_id.split(".")[0][1:])
            for pose in t.poses:
                gt_pose = dict(gt.frames[pose.frame])[person]
                assert np.array_equal(pose.xy, gt_pose.xy)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            Scenario(miss_rate=1.5)
        with pytest.raises(ValueError):
            Scenario(pose_noise=-1)
        with pytest.raises(ValueError):
            Scenario(n_people=0)


class TestRecoveryRate:
    def test_no_misses_full_recovery(self, params):
        scen = Scenario(n_people=2, video_len=20, miss_rate=0.0,
                        pose_noise=1.0, seed=2)
        gt, tracklets = generate(scen, CFG)
        tracks = stitch(tracklets, CFG, params, video_len=20)
        assert recovery_rate(gt, tracks) == 1.0

    def test_framewise_rate_matches_binomial(self, params):
        hits = 0
        total = 0
        p = 0.3
        for seed in range(10):
            scen = Scenario(n_people=3, video_len=40, miss_rate=p,
                            pose_noise=1.0, seed=seed)
            gt, tracklets = generate(scen, CFG)
            tracks = link_framewise(keyframe_detections(tracklets, 40), params)
            rate = recovery_rate(gt, tracks)
            hits += rate * gt.n_entries()
            total += gt.n_entries()
        pooled = hits / total
        sd = np.sqrt(p * (1 - p) / total)
        assert abs(pooled - (1 - p)) < 4 * sd

    def test_stitched_never_below_framewise(self, params):
        for seed in range(8):
            scen = Scenario(n_people=3, video_len=30, miss_rate=0.4,
                            pose_noise=1.5, seed=seed)
            gt, tracklets = generate(scen, CFG)
            if not tracklets:
                continue
            stitched = stitch(tracklets, CFG, params, video_len=30)
            framewise = link_framewise(keyframe_detections(tracklets, 30),
                                       params)
            assert recovery_rate(gt, stitched) >= recovery_rate(gt, framewise)

    def test_longer_clips_do_not_hurt_recovery(self, params):
        means = []
        for clip_len in (3, 5, 9):
            cfg = ClipConfig(clip_len, 1)
            rates = []
            for seed in range(50):
                scen = Scenario(n_people=3, video_len=30, miss_rate=0.35,
                                pose_noise=1.0, seed=seed)
                gt, tracklets = generate(scen, cfg)
                if not tracklets:
                    rates.append(0.0)
                    continue
                tracks = stitch(tracklets, cfg, params, video_len=30)
                rates.append(recovery_rate(gt, tracks))
            means.append(float(np.mean(rates)))
        assert means[0] <= means[1] + 1e-9
        assert means[1] <= means[2] + 1e-9
