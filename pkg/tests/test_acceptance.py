"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the lines as they
complete. Every scenario is seeded, so all Monte-Carlo checks are exact
reruns of verified draws.
"""

import itertools

import numpy as np

from posestitch import (ClipConfig, GroundTruth, MergeConfig, OksParams,
                        Pose, Scenario, baseline_merge, compute_ap,
                        compute_mota, edge_cost, enlarge_bbox, generate,
                        generate_with_info, greedy_match, hungarian_solve,
                        link_framewise, mean_shift, merge_track, oks,
                        oks_nms, recovery_rate, solve_layer_path, stitch)
from posestitch import filter_predictions
from posestitch.core import BBox, HypothesisSet, Track
from posestitch.cli import keyframe_detections, main
from posestitch import io
from posestitch.stmerge import JointCluster

from conftest import make_pose


def _line(num, name, ok, detail=""):
    print(f"\n[criterion {num}] {'PASS' if ok else 'FAIL'} — {name}"
          f"{': ' + detail if detail else ''}")
    return ok


def brute_min_assignment(cost):
    """Exhaustive permutation search; fsum makes each candidate's total the
    correctly rounded sum, so optima compare exactly."""
    import math
    n, m = cost.shape
    if n <= m:
        return min(math.fsum(cost[i, perm[i]] for i in range(n))
                   for perm in itertools.permutations(range(m), n))
    return min(math.fsum(cost[perm[j], j] for j in range(m))
               for perm in itertools.permutations(range(n), m))


def enumerate_paths_min(sizes, centers, capacity, lam):
    """Exhaustive path enumeration by broadcasting every layer choice."""
    n = len(sizes)
    shapes = [len(s) for s in sizes]

    def lift(arr, axes):
        sh = [1] * n
        for ax in axes:
            sh[ax] = shapes[ax]
        return np.asarray(arr, float).reshape(sh)

    total = lift(capacity - np.asarray(sizes[0], float), [0])
    total = total + lift(capacity - np.asarray(sizes[-1], float), [n - 1])
    for i in range(n - 1):
        sa = capacity - np.asarray(sizes[i], float)
        sb = capacity - np.asarray(sizes[i + 1], float)
        d2 = ((np.asarray(centers[i], float)[:, None, :]
               - np.asarray(centers[i + 1], float)[None, :, :]) ** 2).sum(-1)
        edge = sa[:, None] + sb[None, :] + lam * d2
        total = total + lift(edge, [i, i + 1])
    return float(total.min())


class TestCriterion1SolverOracles:
    def test_solver_oracle_equivalence(self):
        rng = np.random.default_rng(1001)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 7))
            m = int(rng.integers(1, 7))
            cost = rng.uniform(-1.0, 0.0, (n, m))
            _, got = hungarian_solve(cost)
            worst = max(worst, abs(got - brute_min_assignment(cost)))
        hungarian_ok = worst == 0.0

        worst_path = 0.0
        for _ in range(1000):
            layers = int(rng.integers(1, 7))
            sizes = [rng.integers(1, 10, int(rng.integers(1, 5))).astype(float)
                     for _ in range(layers)]
            centers = [rng.uniform(0, 50, (len(s), 2)) for s in sizes]
            lam = float(rng.choice([0.0, 0.1, 1.0, 10.0]))
            _, got = solve_layer_path(sizes, centers, 9, lam)
            want = enumerate_paths_min(sizes, centers, 9, lam)
            worst_path = max(worst_path, abs(got - want))
        path_ok = worst_path <= 1e-9

        ok = _line(1, "solver oracle equivalence",
                   hungarian_ok and path_ok,
                   f"hungarian max|diff|={worst:.1e} (1000 matrices), "
                   f"path max|diff|={worst_path:.1e} (1000 graphs)")
        assert ok


class TestCriterion2EdgeCostFidelity:
    def test_transition_cost_unit_fidelity(self):
        def cl(frame, pts):
            pts = np.asarray(pts, float)
            return JointCluster(pts.mean(axis=0), pts, np.zeros(len(pts)),
                                frame, 0)

        # (|H|, sizes 9 and 8, distance^2 = 10, lam 0.1) -> exactly 2.0
        a = cl(0, [[0.0, 0.0]] * 9)
        b = cl(1, [[3.0, 1.0]] * 8)
        hand = edge_cost(a, b, 9, MergeConfig(lam=0.1))

        full_zero = edge_cost(cl(0, [[5.0, 5.0]] * 9), cl(1, [[5.0, 5.0]] * 9),
                              9, MergeConfig())
        sizes_only = edge_cost(cl(0, [[0.0, 0.0]] * 4),
                               cl(1, [[77.0, -3.0]] * 7), 9,
                               MergeConfig(lam=0.0))
        ok = _line(2, "transition cost unit fidelity",
                   hand == 2.0 and full_zero == 0.0 and sizes_only == 7.0,
                   f"hand={hand}, coincident-full={full_zero}, "
                   f"lam0={sizes_only}")
        assert ok


class TestCriterion3RecoveryReproduction:
    def test_detector_miss_recovery(self):
        cfg = ClipConfig(9, 1)
        params = OksParams()
        p = 0.3
        fw_hit = st_hit = total = 0.0
        for seed in range(50):
            scen = Scenario(n_people=5, video_len=100, miss_rate=p,
                            pose_noise=2.0, seed=seed)
            gt, tracklets = generate(scen, cfg)
            n = gt.n_entries()
            tracks = stitch(tracklets, cfg, params, video_len=100)
            st_hit += recovery_rate(gt, tracks) * n
            framewise = link_framewise(keyframe_detections(tracklets, 100),
                                       params)
            fw_hit += recovery_rate(gt, framewise) * n
            total += n
        fw_recall = fw_hit / total
        st_recall = st_hit / total
        gap = 100 * (st_recall - fw_recall)
        ok = _line(3, "detector-miss recovery (50 seeds x 5 people x 100 frames)",
                   abs(fw_recall - (1 - p)) <= 0.02
                   and st_recall >= 0.99 and gap > 20.0,
                   f"framewise={100 * fw_recall:.2f}% (target 70±2), "
                   f"stitched={100 * st_recall:.3f}% (>=99), gap=+{gap:.1f}pts")
        assert ok


class TestCriterion4EntanglementCorrection:
    def test_consensus_beats_confidence_argmax(self):
        cfg = ClipConfig(9, 1)
        params = OksParams()
        mc = MergeConfig()
        st_ok = st_tot = base_ok = base_tot = 0
        st_wins = 0
        for seed in range(50):
            scen = Scenario(n_people=3, video_len=50, spacing=120.0,
                            speed_range=(0.2, 0.5), amplitude_range=(4.0, 10.0),
                            miss_rate=0.1, pose_noise=2.0, swap_rate=0.3,
                            seed=seed)
            gt, tracklets, info = generate_with_info(scen, cfg)
            owner = {}
            for t in tracklets:
                person = int(t.source_id.split(".")[0][1:])
                for pose in t.poses:
                    owner[id(pose)] = person
            tracks = stitch(tracklets, cfg, params, video_len=scen.video_len)
            st = {t.track_id: merge_track(t, mc, 9, "full") for t in tracks}
            base = {t.track_id: merge_track(t, mc, 9, "baseline")
                    for t in tracks}
            radius = 0.5 * scen.head_size
            so = stt = bo = bt = 0
            for (p, _), (lo, hi, _) in info.corrupted.items():
                for f in range(lo, hi + 1):
                    n_corr = info.corrupted_at(p, f)
                    n_tot = info.emitted_covering(p, f, cfg)
                    if n_tot == 0 or n_corr / n_tot >= 0.4:
                        continue  # outside the minority-corruption regime
                    best_t, best_n = None, 0
                    for t in tracks:
                        hs = t.frames.get(f)
                        if hs is None:
                            continue
                        n = sum(1 for pose, _ in hs
                                if owner.get(id(pose)) == p)
                        if n > best_n:
                            best_n, best_t = n, t
                    if best_t is None:
                        continue
                    gpose = dict(gt.frames[f])[p]
                    for table, is_st in ((st, True), (base, False)):
                        mp = table[best_t.track_id].merged[f]
                        d = np.linalg.norm(mp.xy - gpose.xy, axis=1)
                        n_ok = int(((d <= radius) & mp.visible).sum())
                        if is_st:
                            so += n_ok
                            stt += gpose.k
                        else:
                            bo += n_ok
                            bt += gpose.k
            st_ok += so
            st_tot += stt
            base_ok += bo
            base_tot += bt
            if stt and so / stt > bo / bt:
                st_wins += 1
        st_frac = st_ok / st_tot
        base_frac = base_ok / base_tot
        ok = _line(4, "entanglement correction (paired, 50 seeds)",
                   st_frac >= 0.95 and st_frac > base_frac,
                   f"spatial-temporal={100 * st_frac:.2f}% (>=95), "
                   f"argmax-baseline={100 * base_frac:.2f}%, "
                   f"per-seed wins={st_wins}/50")
        assert ok


class TestCriterion5AblationOrdering:
    def test_merge_mode_ordering(self):
        cfg = ClipConfig(9, 1)
        params = OksParams()
        mc = MergeConfig()
        modes = ("baseline", "spatial", "temporal", "full")
        motas = {m: [] for m in modes + ("framewise",)}
        for seed in range(50):
            scen = Scenario(n_people=4, video_len=60, spacing=60.0,
                            speed_range=(0.5, 1.5), amplitude_range=(5.0, 15.0),
                            miss_rate=0.25, pose_noise=2.5, swap_rate=0.3,
                            seed=seed)
            gt, tracklets = generate(scen, cfg)
            tracks = stitch(tracklets, cfg, params, video_len=scen.video_len)
            for mode in modes:
                merged = [merge_track(t, mc, 9, mode) for t in tracks]
                from posestitch import evaluate
                motas[mode].append(evaluate(merged, gt).mean_mota)
            framewise = link_framewise(
                keyframe_detections(tracklets, scen.video_len), params)
            framewise = [merge_track(t, mc, 9, "baseline") for t in framewise]
            from posestitch import evaluate
            motas["framewise"].append(evaluate(framewise, gt).mean_mota)
        m = {k: float(np.mean(v)) for k, v in motas.items()}
        chain = m["framewise"] < m["baseline"] < m["full"]
        spatial_between = m["baseline"] < m["spatial"] < m["full"]
        temporal_between = m["baseline"] < m["temporal"] < m["full"]
        ok = _line(5, "ablation ordering (means over 50 seeds)",
                   chain and spatial_between and temporal_between,
                   "MOTA: framewise=%.4f < baseline=%.4f < full=%.4f; "
                   "spatial=%.4f, temporal=%.4f in between" % (
                       m["framewise"], m["baseline"], m["full"],
                       m["spatial"], m["temporal"]))
        assert ok


class TestCriterion6ClipLengthTrend:
    def test_sweep_fn_and_mota_trends(self, tmp_path):
        scen_path = tmp_path / "scenario.cfg"
        scen_path.write_text(
            "n_people = 3\nvideo_len = 50\nhead_size = 25.0\n"
            "miss_rate = 0.3\npose_noise = 2.0\nswap_rate = 0.1\nseed = 0\n")
        out = tmp_path / "sweep.jsonl"
        rc = main(["sweep", "--scenario", str(scen_path),
                   "--clip-lens", "1,3,5,7,9", "--seeds", "50",
                   "--out", str(out)])
        assert rc == 0
        recs = sorted(io.read_report(out), key=lambda r: r["clip_len"])
        fn = [r["mean_fn"] for r in recs]
        fn_sem = [r["sem_fn"] for r in recs]
        mota = [r["mean_mota"] for r in recs]
        mota_sem = [r["sem_mota"] for r in recs]

        def inversions(vals, sems, increasing):
            bad_beyond_se = 0
            within_se = 0
            for i in range(len(vals) - 1):
                delta = vals[i + 1] - vals[i]
                if not increasing:
                    delta = -delta
                if delta >= 0:
                    continue
                se = np.hypot(sems[i], sems[i + 1])
                if -delta <= se:
                    within_se += 1
                else:
                    bad_beyond_se += 1
            return within_se, bad_beyond_se

        fn_within, fn_bad = inversions(fn, fn_sem, increasing=False)
        mota_within, mota_bad = inversions(mota, mota_sem, increasing=True)
        ok = _line(6, "clip-length trend (cmd_sweep, 50-seed means)",
                   fn_bad == 0 and fn_within <= 1
                   and mota_bad == 0 and mota_within <= 1,
                   f"FN={['%.1f' % v for v in fn]} "
                   f"(inversions within 1 SE: {fn_within}), "
                   f"MOTA={['%.4f' % v for v in mota]} "
                   f"(inversions within 1 SE: {mota_within})")
        assert ok


class TestCriterion7MetricCorrectness:
    def test_exact_metric_values(self):
        k = 15
        head = 20.0

        def gt_pose(f, center):
            return make_pose(f, center, head_size=head)

        # 2 people x 10 frames, identities swap once at frame 5
        frames = {f: [(0, gt_pose(f, (50, 50))), (1, gt_pose(f, (300, 300)))]
                  for f in range(10)}
        gt = GroundTruth(frames)
        preds = {}
        for f in range(10):
            ids = (10, 11) if f < 5 else (11, 10)
            preds[f] = [(ids[i], Pose(f, pose.xy, np.full(k, 0.9),
                                      pose.visible))
                        for i, (_, pose) in enumerate(frames[f])]
        mota_swap, *_ = compute_mota(preds, gt)
        swap_exact = bool(np.all(mota_swap == 0.9))

        single = GroundTruth({0: [(0, gt_pose(0, (50, 50)))]})
        fixture = {0: [(0, make_pose(0, (50, 50), conf=np.full(k, 0.5))),
                       (1, make_pose(0, (700, 700), conf=np.full(k, 0.9)))]}
        ap_half = compute_ap(fixture, single)
        ap_exact = bool(np.all(ap_half == 50.0))

        perfect_preds = {f: [(tid, Pose(f, pose.xy, np.full(k, 0.9),
                                        pose.visible))
                             for tid, pose in frames[f]] for f in range(10)}
        ap_perfect = compute_ap(perfect_preds, gt)
        mota_perfect, *_ = compute_mota(perfect_preds, gt)
        mota_empty, *_ = compute_mota({}, gt)
        perfect_ok = bool(np.all(ap_perfect == 100.0)
                          and np.all(mota_perfect == 1.0)
                          and np.all(mota_empty == 0.0))

        ok = _line(7, "metric correctness",
                   swap_exact and ap_exact and perfect_ok,
                   f"swap-MOTA={mota_swap[0]} (=0.9), "
                   f"1TP/1FP-AP={ap_half[0]} (=50.0), perfect AP/MOTA exact")
        assert ok


class TestCriterion8InvariantSuites:
    def test_randomized_invariant_bundle(self):
        rng = np.random.default_rng(8001)
        params = OksParams()
        checks = {}

        # oks symmetry / self-similarity / translation invariance
        bad = 0
        for _ in range(1000):
            a = make_pose(0, rng.uniform(0, 80, 2),
                          jitter=rng.normal(0, 4, (15, 2)))
            b = make_pose(0, rng.uniform(0, 80, 2),
                          jitter=rng.normal(0, 4, (15, 2)))
            v = rng.uniform(-300, 300, 2)
            if oks(a, b, 900.0, params) != oks(b, a, 900.0, params):
                bad += 1
                continue
            if oks(a, a, 900.0, params) != 1.0:
                bad += 1
                continue
            a2 = Pose(0, a.xy + v, a.conf, a.visible)
            b2 = Pose(0, b.xy + v, b.conf, b.visible)
            if abs(oks(a2, b2, 900.0, params) - oks(a, b, 900.0, params)) > 1e-12:
                bad += 1
        checks["oks symmetry+translation"] = bad == 0

        # enlarge_bbox center preservation
        bad = 0
        for _ in range(1000):
            box = BBox(*rng.uniform(-500, 500, 2), *rng.uniform(0.1, 400, 2))
            out = enlarge_bbox(box, float(rng.uniform(0, 4)))
            if max(abs(out.center[0] - box.center[0]),
                   abs(out.center[1] - box.center[1])) > 1e-9:
                bad += 1
        checks["enlarge_bbox center"] = bad == 0

        # hungarian <= greedy <= 0 with gating
        from posestitch import GATED
        bad = 0
        for _ in range(1000):
            n, m = rng.integers(1, 7, 2)
            cost = rng.uniform(-1.0, 0.0, (n, m))
            cost = np.where(rng.random((n, m)) < 0.3, GATED, cost)
            pairs = greedy_match(cost)
            gcost = sum(cost[r, c] for r, c in pairs)
            _, hcost = hungarian_solve(cost)
            if not (hcost <= gcost + 1e-12 and gcost <= 0):
                bad += 1
        checks["hungarian<=greedy<=0"] = bad == 0

        # mean-shift cluster invariants
        bad = 0
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            pts = rng.uniform(0, 30, (n, 2))
            bw = float(rng.uniform(0.5, 15.0))
            for c in mean_shift(pts, bw):
                if np.abs(c.points.mean(axis=0) - c.center).max() > 1e-6:
                    bad += 1
                if np.linalg.norm(c.points - c.center, axis=1).max() > bw + 1e-6:
                    bad += 1
        checks["cluster invariants"] = bad == 0

        # edge_cost nonnegative, zero iff full+coincident
        mc = MergeConfig()
        bad = 0
        for _ in range(1000):
            na, nb = rng.integers(1, 10, 2)
            pa = rng.uniform(0, 50, (int(na), 2))
            pb = rng.uniform(0, 50, (int(nb), 2))
            a = JointCluster(pa.mean(axis=0), pa, np.zeros(len(pa)), 0, 0)
            b = JointCluster(pb.mean(axis=0), pb, np.zeros(len(pb)), 1, 0)
            c = edge_cost(a, b, 9, mc)
            if c < 0:
                bad += 1
            if c == 0 and not (na == nb == 9 and np.allclose(pa.mean(0),
                                                             pb.mean(0))):
                bad += 1
        checks["edge_cost >= 0"] = bad == 0

        # baseline_merge equals per-joint argmax oracle
        bad = 0
        for _ in range(1000):
            hs = HypothesisSet(0, 9)
            poses = []
            for src in range(int(rng.integers(1, 6))):
                p = make_pose(0, rng.uniform(0, 50, 2),
                              conf=rng.uniform(0, 1, 15))
                hs.add(p, src)
                poses.append(p)
            out = baseline_merge(hs)
            for j in range(15):
                confs = [p.conf[j] for p in poses]
                pick = int(np.argmax(confs))
                if out.conf[j] != confs[pick] or \
                        not np.array_equal(out.xy[j], poses[pick].xy[j]):
                    bad += 1
        checks["baseline argmax oracle"] = bad == 0

        # filter_predictions idempotence
        bad = 0
        for _ in range(200):
            tracks = []
            for tid in range(3):
                t = Track(tid)
                for f in range(int(rng.integers(3, 10))):
                    t.merged[f] = make_pose(
                        f, rng.uniform(0, 200, 2), spread=40.0,
                        conf=rng.uniform(0, 1, 15),
                        visible=rng.random(15) < 0.9)
                tracks.append(t)
            thr = rng.uniform(0, 0.6, 15)
            once = filter_predictions(tracks, thr)
            twice = filter_predictions(once, thr)
            if len(once) != len(twice):
                bad += 1
                continue
            for x, y in zip(once, twice):
                for f in x.merged:
                    if not np.array_equal(x.merged[f].xy, y.merged[f].xy):
                        bad += 1
        checks["filter idempotence"] = bad == 0

        # oks_nms matches an independent greedy reference
        bad = 0
        for _ in range(1000):
            poses = [make_pose(0, rng.uniform(0, 60, 2),
                               jitter=rng.normal(0, 6, (15, 2)),
                               conf=rng.uniform(0.05, 1.0, 15))
                     for _ in range(4)]
            scales = rng.uniform(500, 3000, 4)
            got = oks_nms(poses, 0.5, scales, params)
            order = sorted(range(4), key=lambda i: -float(
                poses[i].conf[poses[i].visible].mean()))
            kept = []
            for i in order:
                if all(oks(poses[j], poses[i], float(scales[j]), params) < 0.5
                       for j in kept):
                    kept.append(i)
            if [id(p) for p in got] != [id(poses[i]) for i in kept]:
                bad += 1
        checks["oks_nms greedy reference"] = bad == 0

        failed = [name for name, passed in checks.items() if not passed]
        ok = _line(8, "randomized invariant suites (>=1000 cases each)",
                   not failed,
                   "all passed" if not failed else f"failed: {failed}")
        assert ok
