import csv

import numpy as np
import pytest

from asymp_explore.config import MissionConfig, Mode
from asymp_explore.mission import (
    DECISION_COLUMNS,
    GP_COLUMNS,
    METRIC_COLUMNS,
    SUMMARY_COLUMNS,
    bucket_by_coverage,
    compare_modes,
    count_inflation_violations,
    run_mission,
    write_decisions,
    write_gp_log,
    write_metrics,
    write_summary,
)
from asymp_explore.occupancy import OccupancyOctree


def room(**kw):
    return MissionConfig(world__kind="room", world__extent_x_m=10, world__extent_y_m=10, **kw)


@pytest.fixture(scope="module")
def room_result():
    return run_mission(room(), check_safety=True)


@pytest.fixture(scope="module")
def bayes_result():
    return run_mission(room(mission__mode="asymp_bayes"))


class TestRunMission:
    def test_zero_time_budget(self):
        res = run_mission(room(mission__max_sim_time_s=0))
        assert not res.success
        assert len(res.timeline) == 1
        assert res.sim_time == 0.0

    def test_room_reaches_threshold(self, room_result):
        assert room_result.success
        assert room_result.termination == "threshold"
        assert room_result.final_coverage >= 0.9
        assert room_result.sim_time_to_threshold <= room_result.sim_time

    def test_room_is_safe(self, room_result):
        assert room_result.false_free_max == 0
        assert room_result.inflation_violations == 0

    def test_timeline_monotone(self, room_result):
        t = [r[1] for r in room_result.timeline]
        cov = [r[2] for r in room_result.timeline]
        assert np.all(np.diff(t) > 0)
        assert np.all(np.diff(cov) >= 0)

    def test_deterministic(self, room_result):
        again = run_mission(room(), check_safety=True)
        assert again.timeline == room_result.timeline
        strip = [{k: v for k, v in r.items() if not k.startswith("t_")} for r in again.metrics]
        ref = [{k: v for k, v in r.items() if not k.startswith("t_")} for r in room_result.metrics]
        assert repr(strip) == repr(ref)

    def test_metric_rows(self, room_result):
        assert room_result.n_updates == len(room_result.timeline)
        for row in room_result.metrics:
            assert set(row) == set(METRIC_COLUMNS)
            assert row["t_map_us"] >= 0 and row["t_frontier_us"] >= 0

    def test_bayes_logs_gp_samples(self, bayes_result):
        assert bayes_result.gp_log
        assert set(bayes_result.gp_log[0]) == set(GP_COLUMNS)
        assert any(d["gain_source"] == "gp" for d in bayes_result.decisions)

    def test_run_past_threshold_drains_frontiers(self):
        res = run_mission(room(mission__stop_at_threshold=False))
        assert res.termination == "exhausted"
        assert res.final_frontiers <= 0.01 * res.peak_frontiers


class TestOutputs:
    def test_csv_headers(self, room_result, bayes_result, tmp_path):
        for fn, cols, res in ((write_metrics, METRIC_COLUMNS, room_result),
                              (write_decisions, DECISION_COLUMNS, room_result),
                              (write_gp_log, GP_COLUMNS, bayes_result)):
            f = tmp_path / f"{fn.__name__}.csv"
            fn(f, res)
            with open(f) as fh:
                reader = csv.reader(fh)
                assert tuple(next(reader)) == cols
                assert sum(1 for _ in reader) > 0

    def test_bucket_by_coverage(self):
        tl = [(0, 0.0, 0.0), (10, 1.0, 0.05), (20, 2.0, 0.12), (30, 3.0, 0.95)]
        b = bucket_by_coverage(tl)
        assert b[0.05] == 1.0
        assert b[0.1] == 2.0
        assert b[0.15] == 3.0 and b[0.95] == 3.0
        assert 1.0 not in b

    def test_inflation_violation_count(self):
        occ = OccupancyOctree((0, 0, 0), (4, 4, 4), 0.4)
        occ.update_node((5, 5, 5), True)
        c = occ.center_of((5, 5, 5))
        wps = np.array([c + [0.4, 0, 0], c + [2.0, 0, 0], c + [0.6, 0, 0]])
        assert count_inflation_violations(occ, wps, 0.6) == 2
        assert count_inflation_violations(occ, wps, 0.0) == 0


class TestCompare:
    def test_identical_modes_agree(self, tmp_path):
        cfg = room(mission__max_sim_time_s=20)
        rows_a, per_a = compare_modes(cfg, 2, modes=(Mode.ASYMP,))
        rows_b, per_b = compare_modes(cfg, 2, modes=(Mode.ASYMP,))
        ta = [r.timeline for r in per_a[Mode.ASYMP]]
        tb = [r.timeline for r in per_b[Mode.ASYMP]]
        assert ta == tb
        deltas = [a[-1][2] - b[-1][2] for a, b in zip(ta, tb)]
        assert np.var(deltas) == 0.0

    def test_summary_rows(self, tmp_path):
        rows, per_seed = compare_modes(room(mission__max_sim_time_s=20), 2)
        metrics = {r["metric"] for r in rows}
        assert len(rows) == 2 * len(metrics)
        assert {r["mode"] for r in rows} == {"asymp", "asymp_bayes"}
        assert all(len(v) == 2 for v in per_seed.values())
        f = tmp_path / "s.csv"
        write_summary(f, rows)
        with open(f) as fh:
            assert tuple(next(csv.reader(fh))) == SUMMARY_COLUMNS

    def test_bad_seed_count(self):
        with pytest.raises(ValueError):
            compare_modes(room(), 1)
