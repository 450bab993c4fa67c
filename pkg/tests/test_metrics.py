import math

import numpy as np
import pytest

from fluxlab.metrics import (CoverageTracker, SocialTracker, compute_spl,
                             coverage_from_records, social_metrics_from_records)
from fluxlab.scenes import Scene

from oracles import capsule_cell_count


class TestSPL:
    def test_optimal_path(self):
        assert compute_spl(True, 5.0, 5.0) == 1.0

    def test_failure_zeroes(self):
        assert compute_spl(False, 5.0, 3.0) == 0.0

    def test_double_length_halves(self):
        assert compute_spl(True, 5.0, 10.0) == 0.5

    def test_actual_shorter_capped_at_one(self):
        assert compute_spl(True, 5.0, 4.0) == 1.0

    def test_domain_error(self):
        with pytest.raises(ValueError):
            compute_spl(True, 0.0, 3.0)
        with pytest.raises(ValueError):
            compute_spl(True, -1.0, 3.0)


def _records(dist_series_per_ped, robot_xy=(0.0, 0.0), dt=0.1):
    """Synthesize records with pedestrians at controlled distances."""
    n_steps = len(dist_series_per_ped[0])
    recs = []
    for t in range(n_steps):
        peds = [{"x": robot_xy[0] + series[t], "y": robot_xy[1]}
                for series in dist_series_per_ped]
        recs.append({"t": (t + 1) * dt,
                     "robot": [robot_xy[0], robot_xy[1], 0.0], "peds": peds})
    return recs


class TestSocialMetrics:
    def test_zero_pedestrians(self):
        recs = _records([[]])
        recs = [{"t": 0.1, "robot": [0, 0, 0], "peds": []}]
        sc, coll, mind = social_metrics_from_records(recs, 0)
        assert sc == 0.0
        assert coll == 0
        assert math.isinf(mind)

    def test_constant_distance_one_meter(self):
        recs = _records([[1.0] * 50])
        sc, coll, mind = social_metrics_from_records(recs, 1)
        assert sc == 1.0
        assert coll == 0
        assert mind == pytest.approx(1.0)

    def test_two_dips_count_two_intrusions(self):
        series = [1.0] * 10 + [0.4] * 5 + [1.0] * 10 + [0.3] * 3 + [1.0] * 5
        recs = _records([series])
        sc, coll, mind = social_metrics_from_records(recs, 1)
        assert coll == 2
        assert mind == pytest.approx(0.3)

    def test_contiguous_interval_counts_once_per_ped(self):
        series = [0.4] * 20
        recs = _records([series, [2.0] * 20])
        sc, coll, mind = social_metrics_from_records(recs, 2)
        assert coll == 1
        assert sc == 1.0

    def test_streaming_equals_bruteforce(self):
        rng = np.random.default_rng(0)
        series = [list(np.abs(rng.normal(1.0, 0.6, 200)) + 0.05) for _ in range(3)]
        recs = _records(series)
        tracker = SocialTracker(3)
        for rec in recs:
            rx, ry = rec["robot"][0], rec["robot"][1]
            tracker.update([math.hypot(p["x"] - rx, p["y"] - ry) for p in rec["peds"]])
        assert tracker.results() == social_metrics_from_records(recs, 3)

    def test_subsample_preserving_crossings_keeps_counts(self):
        # piecewise-constant series: 2x subsampling cannot add/remove crossings
        series = [1.0, 1.0, 1.0, 1.0, 0.3, 0.3, 0.3, 0.3, 1.0, 1.0, 0.2, 0.2, 1.0, 1.0]
        full = _records([series])
        half = _records([series[::2]], dt=0.2)
        _, coll_full, _ = social_metrics_from_records(full, 1)
        _, coll_half, _ = social_metrics_from_records(half, 1)
        assert coll_full == coll_half == 2

    def test_refining_dt_2x_keeps_counts(self):
        # linear-in-time distances: refining inserts midpoints, no new crossings
        coarse = [1.0, 0.8, 0.4, 0.2, 0.4, 0.8, 1.0]
        fine = []
        for a, b in zip(coarse[:-1], coarse[1:]):
            fine.extend([a, (a + b) / 2])
        fine.append(coarse[-1])
        _, c1, _ = social_metrics_from_records(_records([coarse], dt=0.2), 1)
        _, c2, _ = social_metrics_from_records(_records([fine], dt=0.1), 1)
        assert c1 == c2 == 1


class TestCoverage:
    def test_stationary_robot_single_disk(self):
        scene = Scene("open", (0.0, 0.0, 20.0, 20.0))
        tracker = CoverageTracker(scene)
        for _ in range(100):
            tracker.update((10.0, 10.0))
        # analytic: free cells whose center lies in the 2 m disk
        want = capsule_cell_count((10.0, 10.0), (10.0, 10.0), 2.0, 0.5) * 0.25
        assert tracker.area() == pytest.approx(want)

    def test_straight_transit_matches_swept_capsule(self):
        scene = Scene("open", (0.0, 0.0, 30.0, 30.0))
        tracker = CoverageTracker(scene)
        p0, p1 = (8.0, 15.0), (18.0, 15.0)
        for x in np.linspace(p0[0], p1[0], 201):  # 0.05 m spacing
            tracker.update((x, 15.0))
        want = capsule_cell_count(p0, p1, 2.0, 0.5) * 0.25
        assert tracker.area() == pytest.approx(want, rel=0.02)

    def test_never_exceeds_free_area(self):
        scene = Scene("small", (0.0, 0.0, 6.0, 6.0))
        scene.circles = [(3.0, 3.0, 1.0)]
        tracker = CoverageTracker(scene)
        rng = np.random.default_rng(1)
        for _ in range(500):
            tracker.update(tuple(rng.uniform(0, 6, 2)))
        assert tracker.area() <= scene.free_area() + 1e-9

    def test_obstructed_cells_not_counted(self):
        scene = Scene("blocked", (0.0, 0.0, 10.0, 10.0))
        scene.rects = [(4.0, 4.0, 6.0, 6.0)]
        tracker = CoverageTracker(scene)
        tracker.update((5.0, 3.0))
        free_xs, free_ys = [], []
        from fluxlab.scenes import free_cell_centers
        xs, ys = free_cell_centers(scene, 0.5)
        inside = (xs - 5.0) ** 2 + (ys - 3.0) ** 2 <= 4.0
        assert tracker.area() == pytest.approx(float(np.count_nonzero(inside)) * 0.25)


class TestAggregates:
    def test_spl_never_exceeds_sr(self):
        from fluxlab.metrics import EpisodeMetrics, MetricsReport
        rng = np.random.default_rng(2)
        rep = MetricsReport()
        for i in range(50):
            success = bool(rng.integers(2))
            shortest = float(rng.uniform(3, 10))
            actual = shortest * float(rng.uniform(1.0, 2.0))
            spl = compute_spl(success, shortest, actual)
            rep.add(EpisodeMetrics(
                episode=i, task="PointNav", scene="s", outcome="x",
                success=success, time=10.0, path_len=actual, shortest=shortest,
                spl=spl, sc=0.0, coll=0, min_dist=math.inf, ea=0.0))
        agg = rep.aggregate()
        assert 0.0 <= agg["spl"] <= agg["sr"] <= 1.0

    def test_stl_over_successes_only(self):
        from fluxlab.metrics import EpisodeMetrics, MetricsReport
        rep = MetricsReport()
        for i, (succ, plen) in enumerate([(True, 4.0), (False, 99.0), (True, 6.0)]):
            rep.add(EpisodeMetrics(episode=i, task="PointNav", scene="s",
                                   outcome="x", success=succ, time=1.0,
                                   path_len=plen, shortest=3.0,
                                   spl=compute_spl(succ, 3.0, plen), sc=0.0,
                                   coll=0, min_dist=math.inf, ea=0.0))
        assert rep.aggregate()["s_tl"] == pytest.approx(5.0)

    def test_min_dist_excludes_no_ped_episodes(self):
        from fluxlab.metrics import EpisodeMetrics, MetricsReport
        rep = MetricsReport()
        for i, md in enumerate([math.inf, 1.0, 2.0]):
            rep.add(EpisodeMetrics(episode=i, task="SocialNav", scene="s",
                                   outcome="x", success=True, time=1.0,
                                   path_len=3.0, shortest=3.0, spl=1.0, sc=0.0,
                                   coll=0, min_dist=md, ea=0.0))
        assert rep.aggregate()["min_dist"] == pytest.approx(1.5)
